import { describe, expect, it } from "vitest";
import { buildCommand } from "../src/templates.js";

describe("default command templates (byte-exact, all six tasks)", () => {
  it("generate-all", () => {
    expect(buildCommand("generate-all", { className: "apple" }))
      .toBe("Draw a sketch of an apple");
    expect(buildCommand("generate-all", { className: "tree", location: "at the top of" }))
      .toBe("Draw a tree at the top of this sketch");
  });

  it("generate-partial", () => {
    expect(buildCommand("generate-partial", { className: "tree", mode: "complete" }))
      .toBe("Complete this sketch as a tree");
    expect(buildCommand("generate-partial", { className: "tree", location: "at the top of" }))
      .toBe("Add a tree at the top of this sketch");
    expect(buildCommand("generate-partial", { className: "cup" }))
      .toBe("Add a cup to this sketch");
  });

  it("remove-all", () => {
    expect(buildCommand("remove-all", { className: "house" }))
      .toBe("Remove a house from this sketch");
    expect(buildCommand("remove-all")).toBe("Remove all the objects from this sketch");
  });

  it("remove-partial", () => {
    expect(buildCommand("remove-partial", { className: "star", location: "at the bottom left corner of" }))
      .toBe("Remove a star at the bottom left corner of this sketch");
    expect(buildCommand("remove-partial", { className: "star" }))
      .toBe("Remove a star from this sketch");
  });

  it("reproduce", () => {
    expect(buildCommand("reproduce")).toBe("Reproduce this sketch");
  });

  it("classification", () => {
    expect(buildCommand("classification")).toBe("What is the class of this sketch");
    expect(buildCommand("classification", { location: "at the center of" }))
      .toBe("What is the object at the center of this sketch");
    expect(buildCommand("classification", { scope: "multi" }))
      .toBe("What are the objects in this sketch");
  });

  it("articles follow the class name", () => {
    expect(buildCommand("generate-all", { className: "octopus" }))
      .toBe("Draw a sketch of an octopus");
    expect(buildCommand("remove-partial", { className: "umbrella" }))
      .toBe("Remove an umbrella from this sketch");
  });

  it("rejects classless forms that need a class", () => {
    expect(() => buildCommand("generate-all")).toThrow();
    expect(() => buildCommand("remove-partial")).toThrow();
  });
});
