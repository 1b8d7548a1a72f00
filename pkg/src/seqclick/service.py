"""HTTP session service for human-in-the-loop clicking.

Sessions wrap one test scene each: clicks come in, masks go back as
base64 PGM with an IoU readout, and finalized sessions join their
category's prompt pool for future sessions (selected by embedding
similarity at session creation). Responses are pure functions of
(checkpoint, session state, request); per-session access is serialized
by a lock. Request/response schemas are documented in docs/http-api.md.
"""

from __future__ import annotations

import base64
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, Response
from pydantic import BaseModel

from .clicksim import Click, binarize, iou, render_click_maps
from .data import Scene, SceneDataset
from .engine import PromptItem, build_context, predict_with_context
from .model import SegModel
from .tps import Embedding, embed_image, select_topk

FRONTEND_DIR = Path(__file__).resolve().parents[2] / "frontend"


def pgm_b64(mask2d: np.ndarray) -> str:
    """Binary mask -> base64 of a P5 PGM (foreground 255)."""
    m = np.asarray(mask2d)
    m = m.reshape(m.shape[-2:])
    h, w = m.shape
    payload = f"P5\n{w} {h}\n255\n".encode("ascii") + np.where(m > 0, 255, 0).astype(np.uint8).tobytes()
    return base64.b64encode(payload).decode("ascii")


class CreateSessionRequest(BaseModel):
    scene_id: str
    k: int = 5


class ClickRequest(BaseModel):
    x: int
    y: int
    positive: bool = True


@dataclass
class Session:
    id: str
    category: str
    scene: Scene
    prompts: list[PromptItem]
    prompt_ids: list[str]
    prompt_scores: list[float]
    context: object
    clicks: list[Click] = field(default_factory=list)
    current_mask: np.ndarray | None = None
    last_input_mask: np.ndarray | None = None
    last_iou: float = 0.0
    finalized: bool = False
    created_at: str = ""
    updated_at: str = ""
    lock: threading.Lock = field(default_factory=threading.Lock)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def create_app(model: SegModel | None, dataset: SceneDataset, k_default: int = 5) -> FastAPI:
    app = FastAPI(title="seqclick session service")
    sessions: dict[str, Session] = {}
    pools: dict[str, list[tuple[PromptItem, Embedding]]] = {}
    registry_lock = threading.Lock()

    def _session_or_404(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return session

    def _mask_payload(session: Session) -> dict:
        h, w = session.scene.image.shape[-2:]
        mask = session.current_mask if session.current_mask is not None else np.zeros((h, w), np.uint8)
        return {
            "mask_pgm_b64": pgm_b64(mask),
            "iou": session.last_iou,
            "clicks": len(session.clicks),
            "width": w,
            "height": h,
        }

    @app.get("/health")
    def health():
        return {"status": "ok", "model_loaded": model is not None, "scenes": len(dataset.ids())}

    @app.get("/scenes")
    def list_scenes(category: str | None = None, split: str | None = None):
        ids = dataset.ids(category=category, split=split)
        return {"scenes": [{"id": i, "category": dataset._by_id[i]["category"]} for i in ids]}

    @app.get("/scenes/{scene_id}/image")
    def scene_image(scene_id: str):
        if scene_id not in dataset:
            raise HTTPException(status_code=404, detail=f"unknown scene {scene_id}")
        return Response(content=dataset.image_bytes(scene_id), media_type="image/x-portable-pixmap")

    @app.post("/sessions", status_code=201)
    def create_session(req: CreateSessionRequest):
        if model is None:
            raise HTTPException(status_code=503, detail="no checkpoint loaded")
        if req.scene_id not in dataset:
            raise HTTPException(status_code=404, detail=f"unknown scene {req.scene_id}")
        scene = dataset.load(req.scene_id)
        with registry_lock:
            pool = list(pools.get(scene.category, []))
        emb = embed_image(model, scene.image, source_id=scene.id)
        chosen = select_topk(emb, [e for _, e in pool], req.k)
        prompts = [pool[i][0] for i in chosen.indices]
        session = Session(
            id=uuid.uuid4().hex,
            category=scene.category,
            scene=scene,
            prompts=prompts,
            prompt_ids=[p.source_id for p in prompts],
            prompt_scores=list(chosen.scores),
            context=build_context(model, prompts),
            created_at=_now(),
            updated_at=_now(),
        )
        with registry_lock:
            sessions[session.id] = session
        h, w = scene.image.shape[-2:]
        return {
            "session_id": session.id,
            "category": session.category,
            "scene_id": scene.id,
            "width": w,
            "height": h,
            "image_url": f"/scenes/{scene.id}/image",
            "prompts": [
                {"scene_id": sid, "score": score, "image_url": f"/scenes/{sid}/image"}
                for sid, score in zip(session.prompt_ids, session.prompt_scores)
            ],
            "clicks": 0,
        }

    @app.post("/sessions/{session_id}/clicks")
    def apply_click(session_id: str, req: ClickRequest):
        session = _session_or_404(session_id)
        h, w = session.scene.image.shape[-2:]
        if not (0 <= req.x < w and 0 <= req.y < h):
            raise HTTPException(status_code=400, detail=f"click ({req.x},{req.y}) outside {w}x{h}")
        with session.lock:
            click = Click(x=req.x, y=req.y, positive=req.positive)
            # a duplicate click carries no new information: the disk union
            # leaves the maps unchanged and the mask state does not advance,
            # so re-running predict repeats the previous response byte-for-byte
            if click in session.clicks and session.last_input_mask is not None:
                prev = session.last_input_mask
            else:
                prev = session.current_mask if session.current_mask is not None else np.zeros((h, w), np.uint8)
            session.clicks.append(click)
            pred = predict_with_context(
                model,
                session.context,
                session.scene.image,
                session.clicks,
                prev[None].astype(np.float32),
            )
            session.last_input_mask = prev
            session.current_mask = binarize(pred.probabilities.data).reshape(h, w)
            session.last_iou = iou(session.current_mask, session.scene.mask.reshape(h, w))
            session.updated_at = _now()
            return _mask_payload(session)

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        session = _session_or_404(session_id)
        with session.lock:
            payload = _mask_payload(session)
            payload.update(
                {
                    "session_id": session.id,
                    "category": session.category,
                    "scene_id": session.scene.id,
                    "finalized": session.finalized,
                    "click_list": [{"x": c.x, "y": c.y, "positive": c.positive} for c in session.clicks],
                    "prompts": [
                        {"scene_id": sid, "score": score, "image_url": f"/scenes/{sid}/image"}
                        for sid, score in zip(session.prompt_ids, session.prompt_scores)
                    ],
                    "created_at": session.created_at,
                    "updated_at": session.updated_at,
                }
            )
            return payload

    @app.post("/sessions/{session_id}/finalize")
    def finalize_session(session_id: str):
        session = _session_or_404(session_id)
        with session.lock:
            if session.finalized:
                with registry_lock:
                    size = len(pools.get(session.category, []))
                return {"pool_size": size, "warning": "session already finalized"}
            if not session.clicks:
                raise HTTPException(status_code=409, detail="cannot finalize a session with zero clicks")
            item = PromptItem(
                image=session.scene.image,
                clicks=list(session.clicks),
                mask=session.current_mask[None].astype(np.uint8),
                source_id=session.scene.id,
            )
            emb = embed_image(model, session.scene.image, source_id=session.scene.id)
            with registry_lock:
                pools.setdefault(session.category, []).append((item, emb))
                size = len(pools[session.category])
            session.finalized = True
            session.updated_at = _now()
            return {"pool_size": size}

    if FRONTEND_DIR.is_dir() and (FRONTEND_DIR / "index.html").exists():

        @app.get("/")
        def index():
            return FileResponse(FRONTEND_DIR / "index.html")

        @app.get("/styles.css")
        def styles():
            return FileResponse(FRONTEND_DIR / "styles.css")

        @app.get("/dist/{name}")
        def dist(name: str):
            target = (FRONTEND_DIR / "dist" / name).resolve()
            if not str(target).startswith(str(FRONTEND_DIR / "dist")) or not target.exists():
                raise HTTPException(status_code=404, detail="not found")
            return FileResponse(target, media_type="text/javascript")

    return app
