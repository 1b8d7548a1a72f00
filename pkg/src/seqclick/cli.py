"""Command-line entry point: gen-data, train, eval, serve, gradcheck, embed.

Configuration comes from an optional JSON file of flat dotted keys
(``{"model.dim": 64}``); ``--set key=value`` overrides win over the
file, and the typed flags below win over both. ``SPT_DATA_DIR`` is the
default dataset root.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

from .config import ConfigurationError, load_config, parse_override

DATA_DIR_ENV = "SPT_DATA_DIR"


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=str, default=None, help="JSON config of flat dotted keys")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--seed", type=int, default=None)


def _data_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", type=str, default=None, help=f"dataset root (default ${DATA_DIR_ENV})")


def _resolve_data_dir(args) -> str:
    if getattr(args, "data", None):
        return args.data
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return env
    raise ConfigurationError(f"no dataset root: pass --data or set ${DATA_DIR_ENV}")


def _load_cfg(args):
    overrides = dict(parse_override(o) for o in args.overrides)
    return load_config(args.config, overrides)


def cmd_gen_data(args) -> int:
    from .data import build_sequences

    cfg = _load_cfg(args)
    if args.out:
        cfg.data.out_dir = args.out
    if args.seed is not None:
        cfg.data.seed = args.seed
    root = build_sequences(cfg.data)
    n = len(cfg.data.categories) * (cfg.data.train_per_category + cfg.data.eval_per_category)
    print(f"wrote {n} scenes to {root}")
    return 0


def cmd_train(args) -> int:
    from .data import SceneDataset
    from .engine import train
    from .model import SegModel

    cfg = _load_cfg(args)
    if args.seed is not None:
        cfg.train.seed = args.seed
    if args.prompt_len is not None:
        cfg.train.prompt_len = args.prompt_len
    if args.max_clicks is not None:
        cfg.train.max_clicks = args.max_clicks
    if args.iou_target is not None:
        cfg.train.iou_stop = args.iou_target
    dataset = SceneDataset(_resolve_data_dir(args))
    model = SegModel(cfg.model, seed=cfg.train.seed)
    out = Path(args.out or "runs/train")
    path = train(model, dataset, cfg.train, out)
    print(f"checkpoint: {path}")
    return 0


def cmd_eval(args) -> int:
    from .checkpoint import load_model
    from .data import SceneDataset
    from .evaluation import evaluate
    from .tps import load_embedding_sidecar

    cfg = _load_cfg(args)
    protocol = cfg.eval
    if args.protocol:
        protocol.selection = args.protocol
    if args.k is not None:
        protocol.prompt_len = args.k
    if args.prompt_len is not None:
        protocol.prompt_len = args.prompt_len
    if args.max_clicks is not None:
        protocol.max_clicks = args.max_clicks
    if args.iou_target is not None:
        protocol.iou_target = args.iou_target
    if args.seed is not None:
        protocol.seed = args.seed
    protocol = dataclasses.replace(protocol)  # re-run validation

    model, _meta = load_model(_require_checkpoint(args))
    dataset = SceneDataset(_resolve_data_dir(args))
    embeddings = load_embedding_sidecar(args.embeddings) if args.embeddings else None
    report = evaluate(model, dataset, protocol, embeddings=embeddings)
    text = report.to_json()
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"report: {args.out}")
    else:
        print(text)
    if args.dump_trajectories:
        report.dump_trajectories(args.dump_trajectories)
    return 0


def cmd_gradcheck(args) -> int:
    from .gradchecks import run_layer_gradchecks

    reports = run_layer_gradchecks(eps=args.eps, tol=args.tol)
    ok = True
    for name, rep in reports.items():
        status = "PASS" if rep.passed else "FAIL"
        print(f"{status} {name:18s} max_rel_err={rep.max_rel_err:.3e} eps={rep.eps} tol={rep.tol}")
        ok &= rep.passed
    return 0 if ok else 1


def cmd_embed(args) -> int:
    from .checkpoint import load_model
    from .data import SceneDataset
    from .tps import embed_image, save_embedding_sidecar

    model, _meta = load_model(_require_checkpoint(args))
    dataset = SceneDataset(_resolve_data_dir(args))
    ids = dataset.ids(split=args.split) if args.split else dataset.ids()
    embeddings = {}
    for scene_id in ids:
        scene = dataset.load(scene_id)
        embeddings[scene_id] = embed_image(model, scene.image, source_id=scene_id)
    out = args.out or str(Path(_resolve_data_dir(args)) / "embeddings.json")
    save_embedding_sidecar(out, embeddings)
    print(f"wrote {len(embeddings)} embeddings to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .checkpoint import load_model
    from .data import SceneDataset
    from .service import create_app

    model = None
    if args.checkpoint:
        model, _meta = load_model(args.checkpoint)
    dataset = SceneDataset(_resolve_data_dir(args))
    app = create_app(model, dataset, k_default=args.k if args.k is not None else 5)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _require_checkpoint(args) -> str:
    if not args.checkpoint:
        raise ConfigurationError("--checkpoint is required")
    return args.checkpoint


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="seqclick", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate the synthetic benchmark")
    _common_flags(p)
    p.add_argument("--out", type=str, default=None)

    p = sub.add_parser("train", help="train a model")
    _common_flags(p)
    _data_flag(p)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--prompt-len", type=int, default=None)
    p.add_argument("--max-clicks", type=int, default=None)
    p.add_argument("--iou-target", type=float, default=None)

    p = sub.add_parser("eval", help="NoC / mIoU evaluation")
    _common_flags(p)
    _data_flag(p)
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--protocol", choices=["tps", "random", "none"], default=None)
    p.add_argument("--k", type=int, default=None, help="prompts to select")
    p.add_argument("--prompt-len", type=int, default=None)
    p.add_argument("--max-clicks", type=int, default=None)
    p.add_argument("--iou-target", type=float, default=None)
    p.add_argument("--embeddings", type=str, default=None, help="external embedding sidecar")
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--dump-trajectories", type=str, default=None)

    p = sub.add_parser("gradcheck", help="finite-difference layer verification")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)

    p = sub.add_parser("embed", help="write an embedding sidecar for a dataset")
    _common_flags(p)
    _data_flag(p)
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--split", type=str, default=None, choices=["train", "eval"])
    p.add_argument("--out", type=str, default=None)

    p = sub.add_parser("serve", help="interactive session service + UI")
    _common_flags(p)
    _data_flag(p)
    p.add_argument("--checkpoint", type=str, default=None)
    p.add_argument("--host", type=str, default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--k", type=int, default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen-data": cmd_gen_data,
        "train": cmd_train,
        "eval": cmd_eval,
        "gradcheck": cmd_gradcheck,
        "embed": cmd_embed,
        "serve": cmd_serve,
    }
    try:
        return handlers[args.command](args)
    except (ConfigurationError, FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
