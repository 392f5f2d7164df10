"""Command-line entry points.

Exit codes: 0 success, 1 usage error, 2 runtime failure.  Every subcommand
takes --seed; anything stochastic flows from it.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .canvas import blank_canvas, canvas_hash, decode_ppm, encode_ppm
from .codec import UnknownWord
from .dataset import (
    ALL_TASKS,
    BuildConfig,
    read_shard,
    write_dataset,
)
from .evaluation import (
    PSNR_TASKS,
    eval_classification,
    eval_psnr_task,
    export_attention_maps,
    model_streams,
    oracle_streams,
)
from .inference import Budgets, Done, Greedy, Session, StrokeEmitted, TextToken, TopP, run_command, classify
from .model import DecodeStream, ModelConfig, load_checkpoint
from .templates import TEMPLATES, LOCATION_TAGS, TaskKind
from .trainer import TrainConfig, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _policy_args(p: argparse.ArgumentParser):
    p.add_argument("--policy", choices=["greedy", "top-p"], default="greedy")
    p.add_argument("--p", type=float, default=0.9, help="nucleus mass for top-p")
    p.add_argument("--max-tokens", type=int, default=2048)
    p.add_argument("--max-strokes", type=int, default=64)


def _make_policy(args):
    if args.policy == "top-p":
        return TopP(args.p, seed=args.seed)
    return Greedy()


def build_parser() -> _Parser:
    parser = _Parser(prog="sketchlm", description="stroke-drawing language model toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="dataset utilities")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)
    b = ds_sub.add_parser("build", help="synthesize a sample shard + manifest")
    b.add_argument("--classes", default="circle,square,triangle",
                   help="comma-separated class names")
    b.add_argument("--samples", type=int, default=1000)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--tasks", default=",".join(t.value for t in ALL_TASKS))
    b.add_argument("--relationship-fraction", type=float, default=0.15)
    b.add_argument("--max-objects", type=int, default=4)
    b.add_argument("--no-paraphrase", action="store_true")
    b.add_argument("--quickdraw", nargs="*", default=[],
                   help="NDJSON drawing files to use instead of procedural objects")

    t = sub.add_parser("train", help="fine-tune on dataset shards")
    t.add_argument("--config", required=True, help="JSON with 'train' and 'model' sections")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=None, help="override the config seed")
    t.add_argument("--resume", default=None)

    e = sub.add_parser("eval", help="run an evaluation protocol")
    e.add_argument("--task", required=True,
                   choices=[t.value for t in (*PSNR_TASKS, TaskKind.CLASSIFICATION)])
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--limit", type=int, default=0, help="cap the sample count (0: all)")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--oracle", action="store_true",
                   help="score the ground-truth replay oracle instead of the model")
    _policy_args(e)

    g = sub.add_parser("generate", help="run one command through the draw loop")
    g.add_argument("--ckpt")
    g.add_argument("--prompt", required=True)
    g.add_argument("--canvas", default=None, help="starting canvas PPM (default blank)")
    g.add_argument("--out", required=True, help="final canvas PPM path")
    g.add_argument("--events", default=None, help="write the event stream as JSONL")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--oracle-replay", default=None, metavar="SHARD:INDEX",
                   help="replay a dataset sample's ground truth instead of a model")
    _policy_args(g)

    c = sub.add_parser("classify", help="greedy answer for a classification command")
    c.add_argument("--ckpt", required=True)
    c.add_argument("--prompt", required=True)
    c.add_argument("--canvas", default=None)
    c.add_argument("--seed", type=int, default=0)

    a = sub.add_parser("attn-dump", help="export cross-attention maps for a sample")
    a.add_argument("--ckpt", required=True)
    a.add_argument("--data", required=True)
    a.add_argument("--index", type=int, default=0)
    a.add_argument("--placeholder", type=int, default=0)
    a.add_argument("--out", required=True)
    a.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("serve", help="run the studio HTTP service")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--port", type=int, default=8787)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--static", default=None, help="directory of UI assets to serve")
    s.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_dataset_build(args) -> int:
    tasks = tuple(TaskKind(v) for v in args.tasks.split(",") if v)
    cfg = BuildConfig(
        classes=tuple(c for c in args.classes.split(",") if c),
        samples=args.samples,
        seed=args.seed,
        tasks=tasks,
        relationship_fraction=args.relationship_fraction,
        max_objects=args.max_objects,
        use_paraphrase=not args.no_paraphrase,
        quickdraw_paths=tuple(args.quickdraw),
    )
    manifest = write_dataset(cfg, args.out)
    print(json.dumps(manifest, indent=2))
    return 0


def _cmd_train(args) -> int:
    raw = json.loads(Path(args.config).read_text())
    tr = dict(raw.get("train", {}))
    tr["out_dir"] = args.out
    if args.seed is not None:
        tr["seed"] = args.seed
    tr["dataset_paths"] = tuple(tr.get("dataset_paths", ()))
    tcfg = TrainConfig(**tr)
    mcfg = ModelConfig(vocab_size=0, **{
        k: tuple(v) if k == "encoder_channels" else v
        for k, v in raw.get("model", {}).items()
    })
    result = train(tcfg, mcfg, resume_from=args.resume)
    print(json.dumps({
        "checkpoint": str(result.checkpoint_path),
        "final_loss": result.curve[-1][1] if result.curve else None,
        "steps": len(result.curve),
    }, indent=2))
    return 0


def _load_model(path):
    ck = load_checkpoint(path)
    return ck


def _cmd_eval(args) -> int:
    ck = _load_model(args.ckpt)
    task = TaskKind(args.task)
    samples = [s for s in read_shard(args.data) if s.task is task]
    if args.limit:
        samples = samples[: args.limit]
    streams = oracle_streams(ck.vocab) if args.oracle else model_streams(ck.weights)
    budgets = Budgets(args.max_tokens, args.max_strokes)
    model_id = "replay-oracle" if args.oracle else str(args.ckpt)
    if task is TaskKind.CLASSIFICATION:
        rep = eval_classification(streams, samples, ck.vocab, budgets=budgets,
                                  model_id=model_id, seed=args.seed)
    else:
        rep = eval_psnr_task(streams, samples, task, ck.vocab, policy=_make_policy(args),
                             budgets=budgets, model_id=model_id, seed=args.seed)
    print(rep.to_json())
    return 0


def _event_json(ev) -> dict:
    if isinstance(ev, StrokeEmitted):
        return {
            "type": "stroke",
            "stroke": {
                "color": list(ev.stroke.color),
                "width": ev.stroke.width,
                "points": [[p.x, p.y] for p in ev.stroke.points],
            },
            "canvasHash": f"{canvas_hash(ev.canvas_after):016x}",
        }
    if isinstance(ev, TextToken):
        return {"type": "text", "token": ev.word}
    return {"type": "done", "reason": ev.reason}


def _cmd_generate(args) -> int:
    start = decode_ppm(Path(args.canvas).read_bytes()) if args.canvas else blank_canvas()
    if args.oracle_replay:
        shard, _, idx = args.oracle_replay.rpartition(":")
        sample = read_shard(shard)[int(idx)]
        if args.ckpt:
            ck = _load_model(args.ckpt)
            vocab = ck.vocab
        else:
            from .trainer import build_training_vocab

            vocab = build_training_vocab([sample], None)
        from .evaluation import ReplayStream

        stream = ReplayStream.for_sample(sample, vocab)
    else:
        if not args.ckpt:
            raise UsageError("--ckpt is required unless --oracle-replay is given")
        ck = _load_model(args.ckpt)
        vocab = ck.vocab
        stream = DecodeStream(ck.weights)
    session = Session(canvas=start.copy(), policy=_make_policy(args),
                      budgets=Budgets(args.max_tokens, args.max_strokes))
    events = []
    for ev in run_command(session, args.prompt, stream, vocab):
        events.append(_event_json(ev))
    Path(args.out).write_bytes(encode_ppm(session.canvas))
    if args.events:
        with open(args.events, "w") as fh:
            for ev in events:
                fh.write(json.dumps(ev, separators=(",", ":")) + "\n")
    done = events[-1]
    print(json.dumps({"strokes": sum(1 for e in events if e["type"] == "stroke"),
                      "reason": done["reason"], "out": args.out}))
    return 0


def _cmd_classify(args) -> int:
    ck = _load_model(args.ckpt)
    start = decode_ppm(Path(args.canvas).read_bytes()) if args.canvas else blank_canvas()
    session = Session(canvas=start.copy())
    answer = classify(session, args.prompt, DecodeStream(ck.weights), ck.vocab)
    print(json.dumps({"answer": answer}))
    return 0


def _cmd_attn_dump(args) -> int:
    ck = _load_model(args.ckpt)
    samples = read_shard(args.data)
    if not 0 <= args.index < len(samples):
        raise UsageError(f"--index {args.index} out of range (shard has {len(samples)})")
    paths = export_attention_maps(ck.weights, samples[args.index], ck.vocab, args.out,
                                  placeholder_index=args.placeholder)
    print(json.dumps({"files": [str(p) for p in paths]}))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    ck = _load_model(args.ckpt)
    app = create_app(ck.weights, ck.vocab, classes=ck.extra.get("classes", []),
                     static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_HANDLERS = {
    ("dataset", "build"): _cmd_dataset_build,
    ("train", None): _cmd_train,
    ("eval", None): _cmd_eval,
    ("generate", None): _cmd_generate,
    ("classify", None): _cmd_classify,
    ("attn-dump", None): _cmd_attn_dump,
    ("serve", None): _cmd_serve,
}


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = _HANDLERS[(args.command, getattr(args, "dataset_command", None))]
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    try:
        return handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
