/**
 * Default command text per task.  These strings must match the server's
 * templates byte for byte; the builder picks the scenario from which fields
 * are filled in (class, location, and the add/complete switch).
 */

export type Task =
  | "generate-all"
  | "generate-partial"
  | "remove-all"
  | "remove-partial"
  | "reproduce"
  | "classification";

export interface BuilderOptions {
  className?: string;
  location?: string;
  /** generate-partial only: complete one object vs. add a new one */
  mode?: "add" | "complete";
  /** classification without location: single-object vs. list-everything */
  scope?: "single" | "multi";
}

export function articleFor(name: string): string {
  return /^[aeiou]/i.test(name) ? "an" : "a";
}

export function buildCommand(task: Task, opts: BuilderOptions = {}): string {
  const cls = opts.className;
  const loc = opts.location;
  const a = cls ? articleFor(cls) : "";
  switch (task) {
    case "generate-all":
      if (!cls) throw new Error("generate-all needs a class");
      return loc
        ? `Draw ${a} ${cls} ${loc} this sketch`
        : `Draw a sketch of ${a} ${cls}`;
    case "generate-partial":
      if (!cls) throw new Error("generate-partial needs a class");
      if (opts.mode === "complete") return `Complete this sketch as ${a} ${cls}`;
      return loc
        ? `Add ${a} ${cls} ${loc} this sketch`
        : `Add ${a} ${cls} to this sketch`;
    case "remove-all":
      return cls
        ? `Remove ${a} ${cls} from this sketch`
        : "Remove all the objects from this sketch";
    case "remove-partial":
      if (!cls) throw new Error("remove-partial needs a class");
      return loc
        ? `Remove ${a} ${cls} ${loc} this sketch`
        : `Remove ${a} ${cls} from this sketch`;
    case "reproduce":
      return "Reproduce this sketch";
    case "classification":
      if (loc) return `What is the object ${loc} this sketch`;
      return opts.scope === "multi"
        ? "What are the objects in this sketch"
        : "What is the class of this sketch";
  }
}
