"""NoC and mIoU-vs-clicks evaluation over the synthetic benchmark.

Scenes of a category are processed in manifest order; every finished
scene joins that category's prompt pool (with its final predicted mask),
so later scenes can draw prompts from earlier ones. Selection protocols:
``tps`` (embedding similarity), ``random``, ``none``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .clicksim import InteractionTrajectory, run_interaction
from .config import ConfigurationError, EvalProtocol
from .data import SceneDataset
from .engine import PromptItem, make_interactive_predictor
from .model import SegModel
from .tps import Embedding, embed_image, select_topk


def noc(trajectory: InteractionTrajectory | list[float], threshold: float, max_clicks: int) -> int:
    """1-based index of the first IoU >= threshold; max_clicks if never reached."""
    ious = trajectory.ious if isinstance(trajectory, InteractionTrajectory) else list(trajectory)
    if not ious:
        raise ValueError("empty trajectory")
    for i, value in enumerate(ious):
        if value >= threshold:
            return i + 1
    return max_clicks


def miou_at(ious: list[float], k: int) -> float:
    """IoU after k clicks, holding the last value once the loop stopped early."""
    return ious[min(k, len(ious)) - 1]


@dataclass
class CategoryResult:
    noc85: float
    noc90: float
    miou: list[float]  # index k-1 = mean IoU at k clicks
    scenes: int


@dataclass
class EvalReport:
    protocol: dict
    per_category: dict[str, CategoryResult]
    overall_noc85: float
    overall_noc90: float
    overall_miou: list[float]
    trajectories: dict[str, list[float]] = field(default_factory=dict, repr=False)

    def to_json(self) -> str:
        payload = {
            "protocol": self.protocol,
            "per_category": {k: asdict(v) for k, v in self.per_category.items()},
            "overall_noc85": self.overall_noc85,
            "overall_noc90": self.overall_noc90,
            "overall_miou": self.overall_miou,
        }
        return json.dumps(payload, indent=1)

    def dump_trajectories(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            for scene_id, ious in self.trajectories.items():
                fh.write(json.dumps({"scene": scene_id, "ious": ious}) + "\n")


def _select_prompts(
    protocol: EvalProtocol,
    pool: list[tuple[PromptItem, Embedding]],
    test_embedding: Embedding | None,
    rng: np.random.Generator,
) -> list[PromptItem]:
    k = protocol.prompt_len
    if k == 0 or not pool or protocol.selection == "none":
        return []
    if protocol.selection == "random":
        take = min(k, len(pool))
        idx = rng.choice(len(pool), size=take, replace=False)
        return [pool[int(i)][0] for i in idx]
    result = select_topk(test_embedding, [e for _, e in pool], k)
    return [pool[i][0] for i in result.indices]


def evaluate(
    model: SegModel,
    dataset: SceneDataset,
    protocol: EvalProtocol,
    split: str = "eval",
    embeddings: dict[str, Embedding] | None = None,
) -> EvalReport:
    """Interact with every scene of the split under the given protocol.

    ``embeddings`` may supply external vectors per scene id (sidecar);
    otherwise the model's own embedder is used. Deterministic given the
    protocol seed.
    """
    thr85, thr90 = protocol.noc_thresholds
    if protocol.iou_target < max(thr85, thr90):
        raise ConfigurationError("iou_target must reach the NoC thresholds")
    rng = np.random.default_rng(np.random.SeedSequence([0xE7A1, protocol.seed]))

    per_category: dict[str, CategoryResult] = {}
    trajectories: dict[str, list[float]] = {}
    all_noc85, all_noc90, all_miou = [], [], []

    for category in dataset.categories:
        ids = dataset.ids(category=category, split=split)
        if protocol.scenes_per_category:
            ids = ids[: protocol.scenes_per_category]
        if not ids:
            raise ConfigurationError(f"no {split} scenes for category {category}")
        pool: list[tuple[PromptItem, Embedding]] = []
        cat_noc85, cat_noc90, cat_miou = [], [], []
        for scene_id in ids:
            scene = dataset.load(scene_id)
            if embeddings is not None and scene_id in embeddings:
                emb = embeddings[scene_id]
            else:
                emb = embed_image(model, scene.image, source_id=scene_id)
            prompts = _select_prompts(protocol, pool, emb, rng)
            predictor = make_interactive_predictor(model, prompts, scene.image)
            traj = run_interaction(predictor, scene.mask, protocol.max_clicks, protocol.iou_target)

            trajectories[scene_id] = list(traj.ious)
            cat_noc85.append(noc(traj, thr85, protocol.max_clicks))
            cat_noc90.append(noc(traj, thr90, protocol.max_clicks))
            cat_miou.append([miou_at(traj.ious, k) for k in range(1, protocol.miou_clicks + 1)])

            final_mask = (traj.final_mask.probabilities.data >= 0.5).astype(np.uint8)
            pool.append((PromptItem(scene.image, traj.clicks, final_mask, source_id=scene_id), emb))

        result = CategoryResult(
            noc85=float(np.mean(cat_noc85)),
            noc90=float(np.mean(cat_noc90)),
            miou=[float(np.mean([row[k] for row in cat_miou])) for k in range(protocol.miou_clicks)],
            scenes=len(ids),
        )
        per_category[category] = result
        all_noc85.extend(cat_noc85)
        all_noc90.extend(cat_noc90)
        all_miou.extend(cat_miou)

    report = EvalReport(
        protocol={
            "selection": protocol.selection,
            "prompt_len": protocol.prompt_len,
            "max_clicks": protocol.max_clicks,
            "iou_target": protocol.iou_target,
            "seed": protocol.seed,
            "split": split,
        },
        per_category=per_category,
        overall_noc85=float(np.mean(all_noc85)),
        overall_noc90=float(np.mean(all_noc90)),
        overall_miou=[float(np.mean([row[k] for row in all_miou])) for k in range(protocol.miou_clicks)],
        trajectories=trajectories,
    )
    return report
