"""Train toy models over several seeds and compare evaluation protocols.

Mirrors the two headline comparisons: prompted (TPS) vs promptless, and
TPS vs random selection at equal k. Writes one JSON summary per seed plus
an aggregate to --out.

Usage:
    python scripts/run_ablation.py --data dataset/ --out runs/ablation \
        --seeds 0 1 2 --epochs 12 --steps 60
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import time
from pathlib import Path

from seqclick.checkpoint import load_model
from seqclick.config import EvalProtocol, ModelConfig, TrainConfig
from seqclick.data import SceneDataset
from seqclick.engine import train
from seqclick.evaluation import evaluate
from seqclick.model import SegModel


def run_seed(dataset, model_cfg, train_cfg, eval_proto, out_dir: Path, seed: int) -> dict:
    train_cfg = dataclasses.replace(train_cfg, seed=seed)
    model = SegModel(model_cfg, seed=seed)
    t0 = time.time()
    ckpt_path = train(model, dataset, train_cfg, out_dir / f"seed{seed}")
    train_secs = time.time() - t0
    model, _ = load_model(ckpt_path)

    arms = {}
    for name, proto in (
        ("tps", dataclasses.replace(eval_proto, selection="tps", seed=seed)),
        ("none", dataclasses.replace(eval_proto, selection="none", prompt_len=0, seed=seed)),
        ("random", dataclasses.replace(eval_proto, selection="random", seed=seed)),
    ):
        report = evaluate(model, dataset, proto)
        arms[name] = {
            "noc85": report.overall_noc85,
            "noc90": report.overall_noc90,
            "miou": report.overall_miou,
        }
    summary = {"seed": seed, "train_secs": train_secs, "arms": arms}
    (out_dir / f"seed{seed}" / "summary.json").write_text(json.dumps(summary, indent=1))
    return summary


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--epochs", type=int, default=12)
    parser.add_argument("--steps", type=int, default=60)
    parser.add_argument("--batch", type=int, default=2)
    parser.add_argument("--prompt-len", type=int, default=5)
    parser.add_argument("--eval-k", type=int, default=5)
    parser.add_argument("--eval-scenes", type=int, default=8)
    parser.add_argument("--eval-max-clicks", type=int, default=10)
    args = parser.parse_args()

    dataset = SceneDataset(args.data)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    model_cfg = ModelConfig()
    train_cfg = TrainConfig(
        epochs=args.epochs,
        steps_per_epoch=args.steps,
        batch_size=args.batch,
        prompt_len=args.prompt_len,
    )
    eval_proto = EvalProtocol(
        selection="tps",
        prompt_len=args.eval_k,
        max_clicks=args.eval_max_clicks,
        iou_target=0.95,
        miou_clicks=5,
        scenes_per_category=args.eval_scenes,
    )

    summaries = [run_seed(dataset, model_cfg, train_cfg, eval_proto, out_dir, s) for s in args.seeds]

    def mean(arm, key, idx=None):
        vals = [s["arms"][arm][key] if idx is None else s["arms"][arm][key][idx] for s in summaries]
        return sum(vals) / len(vals)

    aggregate = {
        "seeds": args.seeds,
        "noc85": {arm: mean(arm, "noc85") for arm in ("tps", "none", "random")},
        "noc90": {arm: mean(arm, "noc90") for arm in ("tps", "none", "random")},
        "miou1": {arm: mean(arm, "miou", 0) for arm in ("tps", "none", "random")},
        "miou5": {arm: mean(arm, "miou", 4) for arm in ("tps", "none", "random")},
    }
    (out_dir / "aggregate.json").write_text(json.dumps(aggregate, indent=1))
    print(json.dumps(aggregate, indent=1))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
