"""Synthetic sequence benchmark: categories of scenes sharing a target part.

Each category names a composite object and one of its sub-parts; the
ground truth is the union of all instances of that part. Scenes of the
two vehicle categories (and the two house categories) are drawn from the
same visual distribution, so which pixels count as foreground depends on
the category, not on the rendering. Every scene samples one of four
layout modes; scenes in the same mode place the object and its parts in
similar positions, which is what makes similar prompts informative.

On disk: ``manifest.json`` plus binary PPM (P6) images and PGM (P5)
masks, byte-reproducible from the generator seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import DataConfig

CATEGORIES = (
    "vehicle_window",
    "vehicle_wheel",
    "house_door",
    "house_window",
    "mug_handle",
    "bed_pillow",
    "tree_crown",
)

MIN_PART_AREA = 16
_EVAL_SEED_OFFSET = 10_000

_BACKGROUNDS = [(0.16, 0.18, 0.22), (0.20, 0.20, 0.15), (0.15, 0.22, 0.20), (0.22, 0.17, 0.14)]
_BODY_PALETTE = [(0.70, 0.12, 0.12), (0.12, 0.22, 0.65), (0.12, 0.52, 0.22), (0.75, 0.62, 0.10)]
_WINDOW_PALETTE = [(0.70, 0.88, 1.00), (0.62, 0.92, 0.96)]
_HOUSE_PALETTE = [(0.76, 0.66, 0.48), (0.62, 0.62, 0.62), (0.82, 0.76, 0.52)]
_ROOF_PALETTE = [(0.50, 0.20, 0.15), (0.30, 0.30, 0.38)]
_DOOR_PALETTE = [(0.38, 0.22, 0.08), (0.45, 0.12, 0.10)]
_PILLOW_PALETTE = [(0.95, 0.93, 0.88), (0.90, 0.90, 0.97)]
_CROWN_PALETTE = [(0.12, 0.50, 0.16), (0.22, 0.58, 0.16), (0.08, 0.44, 0.26)]


@dataclass
class Scene:
    image: np.ndarray  # float32 [3,H,W] in [0,1]
    mask: np.ndarray  # uint8 [1,H,W], values {0,1}
    category: str
    id: str


def _jitter_color(rng, base, amount=0.025):
    c = np.asarray(base) + rng.uniform(-amount, amount, size=3)
    return np.clip(c, 0.0, 1.0)


def _fill_rect(img, marks, y0, y1, x0, x1, color):
    h, w = img.shape[:2]
    y0, y1 = max(0, y0), min(h, y1)
    x0, x1 = max(0, x0), min(w, x1)
    if y0 >= y1 or x0 >= x1:
        return
    img[y0:y1, x0:x1] = color
    for m in marks:
        m[y0:y1, x0:x1] = True


def _fill_disk(img, marks, cy, cx, r, color):
    h, w = img.shape[:2]
    yy, xx = np.mgrid[0:h, 0:w]
    disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    img[disk] = color
    for m in marks:
        m |= disk


def _fill_triangle(img, marks, apex_y, base_y, cx, half_width, color):
    """Upright isoceles triangle between apex_y and base_y."""
    h, w = img.shape[:2]
    span = max(1, base_y - apex_y)
    for y in range(max(0, apex_y), min(h, base_y)):
        frac = (y - apex_y) / span
        hw = int(round(half_width * frac))
        x0, x1 = max(0, cx - hw), min(w, cx + hw + 1)
        if x0 < x1:
            img[y, x0:x1] = color
            for m in marks:
                m[y, x0:x1] = True


def _rect_clear(part, y0, y1, x0, x1):
    h, w = part.shape
    y0, y1 = max(0, y0), min(h, y1)
    x0, x1 = max(0, x0), min(w, x1)
    return y0 >= y1 or x0 >= x1 or not part[y0:y1, x0:x1].any()


def _disk_clear(part, cy, cx, r):
    h, w = part.shape
    yy, xx = np.mgrid[0:h, 0:w]
    disk = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    return not (disk & part).any()


def _draw_vehicle(img, rng, size, part_kind):
    parent = np.zeros(img.shape[:2], dtype=bool)
    part = np.zeros(img.shape[:2], dtype=bool)

    mode = int(rng.integers(0, 4))
    bx = [4, 12, 20, 28][mode] + int(rng.integers(-1, 2))
    bw = 30 + int(rng.integers(-1, 2))
    bh = 12 + int(rng.integers(0, 2))
    by = 36 + int(rng.integers(-2, 3))
    body_color = _jitter_color(rng, _BODY_PALETTE[int(rng.integers(0, 4))])

    # cabin on top of the body
    cab_h = 11
    cab_x0 = bx + bw // 5
    cab_x1 = bx + (4 * bw) // 5
    _fill_rect(img, [parent], by - cab_h, by, cab_x0, cab_x1, body_color * 0.92)
    _fill_rect(img, [parent], by, by + bh, bx, bx + bw, body_color)

    # two windows inside the cabin
    win_color = _jitter_color(rng, _WINDOW_PALETTE[int(rng.integers(0, 2))])
    win_marks = [parent, part] if part_kind == "window" else [parent]
    cab_w = cab_x1 - cab_x0
    slot = cab_w // 2
    for i in range(2):
        wx0 = cab_x0 + 1 + i * slot
        wx1 = min(wx0 + slot - 2, cab_x1 - 1)
        _fill_rect(img, win_marks, by - cab_h + 2, by - 2, wx0, wx1, win_color)

    # wheels under the body
    wheel_color = _jitter_color(rng, (0.06, 0.06, 0.08), 0.02)
    wheel_r = 5
    wheel_marks = [parent, part] if part_kind == "wheel" else [parent]
    for frac in (0.2, 0.8):
        cx = bx + int(frac * bw)
        _fill_disk(img, wheel_marks, by + bh - 1, cx, wheel_r, wheel_color)

    # confusers on the object itself: a window-palette decal on the body and
    # sometimes a spare-wheel-like disk at a non-canonical spot; which pale
    # rectangles are real windows is resolvable by comparing with context
    if rng.random() < 0.75:
        dec_w = 5 + int(rng.integers(0, 3))
        dec_x = bx + 2 + int(rng.integers(0, max(1, bw - dec_w - 4)))
        dec_y = by + 2 + int(rng.integers(0, max(1, bh - 8)))
        dec_color = _jitter_color(rng, _WINDOW_PALETTE[int(rng.integers(0, 2))])
        if _rect_clear(part, dec_y, dec_y + 5, dec_x, dec_x + dec_w):
            _fill_rect(img, [parent], dec_y, dec_y + 5, dec_x, dec_x + dec_w, dec_color)
    if rng.random() < 0.5:
        sx = bx + (-5 if rng.random() < 0.5 else bw + 5) + int(rng.integers(-2, 3))
        if _disk_clear(part, by + bh - 1, sx, wheel_r - 1):
            _fill_disk(img, [], by + bh - 1, sx, wheel_r - 1, wheel_color)

    return parent, part


def _draw_house(img, rng, size, part_kind):
    parent = np.zeros(img.shape[:2], dtype=bool)
    part = np.zeros(img.shape[:2], dtype=bool)

    mode = int(rng.integers(0, 4))
    bw = 26 + int(rng.integers(-1, 3))
    bh = 22 + int(rng.integers(-1, 2))
    bx = [3, 12, 21, 30][mode] + int(rng.integers(-1, 2))
    by1 = 54 + int(rng.integers(-1, 2))
    by0 = by1 - bh
    body_color = _jitter_color(rng, _HOUSE_PALETTE[int(rng.integers(0, 3))])
    roof_color = _jitter_color(rng, _ROOF_PALETTE[int(rng.integers(0, 2))])

    _fill_rect(img, [parent], by0, by1, bx, bx + bw, body_color)
    roof_h = 8 + int(rng.integers(0, 2))
    _fill_triangle(img, [parent], by0 - roof_h, by0, bx + bw // 2, bw // 2 + 2, roof_color)

    # doors at the bottom edge; count follows the layout mode
    n_doors = 1 + (mode in (1, 3))
    door_color = _jitter_color(rng, _DOOR_PALETTE[int(rng.integers(0, 2))])
    door_marks = [parent, part] if part_kind == "door" else [parent]
    door_w = 8
    door_h = 11 + int(rng.integers(0, 2))
    door_xs = [bx + bw // 2 - door_w // 2] if n_doors == 1 else [bx + 2, bx + bw - door_w - 2]
    for dx in door_xs:
        _fill_rect(img, door_marks, by1 - door_h, by1, dx, dx + door_w, door_color)

    # windows in the upper half; count follows the layout mode
    n_windows = 1 + (mode % 2)
    win_color = _jitter_color(rng, _WINDOW_PALETTE[int(rng.integers(0, 2))])
    win_marks = [parent, part] if part_kind == "window" else [parent]
    win_s = 7
    gap = max(win_s + 2, (bw - 4) // max(1, n_windows))
    for i in range(n_windows):
        wx = bx + 2 + i * gap
        if wx + win_s > bx + bw - 2:
            break
        _fill_rect(img, win_marks, by0 + 3, by0 + 3 + win_s, wx, wx + win_s, win_color)

    # window-palette decal between openings: not a window, not a door
    if rng.random() < 0.75:
        dx = bx + 3 + int(rng.integers(0, max(1, bw - 9)))
        dy = by0 + bh // 2 - 2 + int(rng.integers(0, 3))
        dec_color = _jitter_color(rng, _WINDOW_PALETTE[int(rng.integers(0, 2))])
        if _rect_clear(part, dy, dy + 5, dx, dx + 6):
            _fill_rect(img, [parent], dy, dy + 5, dx, dx + 6, dec_color)

    return parent, part


def _draw_mug(img, rng, size, part_kind):
    parent = np.zeros(img.shape[:2], dtype=bool)
    part = np.zeros(img.shape[:2], dtype=bool)

    mode = int(rng.integers(0, 4))
    bw = 17 + int(rng.integers(0, 2))
    bh = 18 + int(rng.integers(-1, 2))
    bx = [8, 15, 22, 29][mode] + int(rng.integers(-1, 2))
    by0 = 24 + int(rng.integers(-2, 3))
    body_color = _jitter_color(rng, _BODY_PALETTE[int(rng.integers(0, 4))], 0.05)

    _fill_rect(img, [parent], by0, by0 + bh, bx, bx + bw, body_color)

    # handle: a ring segment sticking out on the right, same hue as the body
    cy = by0 + bh // 2
    cx = bx + bw - 1
    r_out = 8
    r_in = r_out - 5
    yy, xx = np.mgrid[0 : img.shape[0], 0 : img.shape[1]]
    d2 = (yy - cy) ** 2 + (xx - cx) ** 2
    ring = (d2 <= r_out * r_out) & (d2 >= r_in * r_in) & (xx >= cx)
    handle_color = np.clip(body_color * 0.85, 0, 1)
    img[ring] = handle_color
    parent |= ring
    if part_kind == "handle":
        part |= ring

    return parent, part


def _draw_bed(img, rng, size, part_kind):
    parent = np.zeros(img.shape[:2], dtype=bool)
    part = np.zeros(img.shape[:2], dtype=bool)

    mode = int(rng.integers(0, 4))
    bw = 34 + int(rng.integers(-1, 2))
    bh = 11 + int(rng.integers(0, 2))
    bx = [4, 10, 16, 22][mode] + int(rng.integers(-1, 2))
    by1 = 50 + int(rng.integers(-1, 2))
    by0 = by1 - bh
    frame_color = _jitter_color(rng, (0.45, 0.30, 0.18), 0.03)
    blanket_color = _jitter_color(rng, _BODY_PALETTE[int(rng.integers(0, 4))], 0.05)
    head_left = mode < 2  # headboard side follows the layout mode

    _fill_rect(img, [parent], by0, by1, bx, bx + bw, blanket_color)
    hb_x = bx if head_left else bx + bw - 3
    _fill_rect(img, [parent], by0 - 9, by1, hb_x, hb_x + 3, frame_color)

    # pillows next to the headboard; count follows the layout mode
    n_pillows = 1 + (mode % 3)
    pillow_color = _jitter_color(rng, _PILLOW_PALETTE[int(rng.integers(0, 2))])
    pil_marks = [parent, part] if part_kind == "pillow" else [parent]
    pw, ph = 8, 6
    for i in range(n_pillows):
        py0 = by0 - ph + 1 + (i % 2) * 2
        px = (hb_x + 4 + i * (pw + 1)) if head_left else (hb_x - 4 - (i + 1) * (pw + 1))
        _fill_rect(img, pil_marks, py0, py0 + ph, px, px + pw, pillow_color)

    # pillow-palette fold on the blanket, far from the headboard
    if rng.random() < 0.75:
        fx = (bx + bw - 12 + int(rng.integers(0, 4))) if head_left else (bx + 2 + int(rng.integers(0, 4)))
        fy = by0 + 2 + int(rng.integers(0, max(1, bh - 7)))
        fold_color = _jitter_color(rng, _PILLOW_PALETTE[int(rng.integers(0, 2))])
        if _rect_clear(part, fy, fy + 4, fx, fx + 7):
            _fill_rect(img, [parent], fy, fy + 4, fx, fx + 7, fold_color)

    return parent, part


def _draw_tree(img, rng, size, part_kind):
    parent = np.zeros(img.shape[:2], dtype=bool)
    part = np.zeros(img.shape[:2], dtype=bool)

    mode = int(rng.integers(0, 4))
    cx = [12, 24, 36, 48][mode] + int(rng.integers(-1, 2))
    trunk_w = 5
    trunk_h = 13 + int(rng.integers(-1, 2))
    ground_y = 56 + int(rng.integers(-1, 2))
    trunk_color = _jitter_color(rng, (0.35, 0.22, 0.10), 0.03)
    crown_color = _jitter_color(rng, _CROWN_PALETTE[int(rng.integers(0, 3))])

    _fill_rect(img, [parent], ground_y - trunk_h, ground_y, cx - trunk_w // 2, cx + (trunk_w + 1) // 2, trunk_color)

    crown_marks = [parent, part] if part_kind == "crown" else [parent]
    r = 10 + int(rng.integers(0, 3))
    cy = ground_y - trunk_h - r + 2
    _fill_disk(img, crown_marks, cy, cx, r, crown_color)
    if mode in (1, 2):
        _fill_disk(img, crown_marks, cy + 2, cx + int(rng.integers(-4, 5)), r - 3, crown_color * 0.95)

    # a bush: crown palette, but on the ground and not part of the tree
    if rng.random() < 0.75:
        bxx = cx + (16 + int(rng.integers(0, 8))) * (1 if cx < 32 else -1)
        br = 5 + int(rng.integers(0, 2))
        if _disk_clear(part, ground_y - 3, bxx, br):
            _fill_disk(img, [], ground_y - 3, bxx, br, crown_color * 0.92)

    return parent, part


_DRAWERS = {
    "vehicle_window": (_draw_vehicle, "window"),
    "vehicle_wheel": (_draw_vehicle, "wheel"),
    "house_door": (_draw_house, "door"),
    "house_window": (_draw_house, "window"),
    "mug_handle": (_draw_mug, "handle"),
    "bed_pillow": (_draw_bed, "pillow"),
    "tree_crown": (_draw_tree, "crown"),
}


def _compose(category: str, rng: np.random.Generator, size: int):
    """Render one scene; returns (image [H,W,3] float, part mask, parent mask)."""
    drawer, part_kind = _DRAWERS[category]
    img = np.empty((size, size, 3), dtype=np.float64)
    img[:] = _jitter_color(rng, _BACKGROUNDS[int(rng.integers(0, 4))], 0.03)

    # distractors behind the object; some reuse part palettes, so "find the
    # pale blob" is not enough and context carries real information
    n_distract = 1 + int(rng.integers(0, 2))
    for _ in range(n_distract):
        palette = [_WINDOW_PALETTE, _DOOR_PALETTE, _BODY_PALETTE, _PILLOW_PALETTE][int(rng.integers(0, 4))]
        color = _jitter_color(rng, palette[int(rng.integers(0, len(palette)))])
        dy, dx = int(rng.integers(0, size)), int(rng.integers(0, size))
        ds = 4 + int(rng.integers(0, 4))
        if rng.random() < 0.5:
            _fill_rect(img, [], dy, dy + ds, dx, dx + ds, color)
        else:
            _fill_disk(img, [], dy, dx, ds // 2 + 1, color)

    parent, part = drawer(img, rng, size, part_kind)

    noise = rng.normal(0.0, 0.004, size=img.shape)
    img = np.clip(img + noise, 0.0, 1.0)
    return img, part, parent


def generate_scene(category: str, seed: int, size: int = 64) -> Scene:
    """Deterministic per (category, seed); part mask has at least 16 pixels."""
    if category not in _DRAWERS:
        raise ValueError(f"unknown category {category!r}")
    cat_idx = CATEGORIES.index(category)
    for attempt in range(8):
        rng = np.random.default_rng(np.random.SeedSequence([cat_idx, int(seed), attempt]))
        img, part, parent = _compose(category, rng, size)
        if part.sum() >= MIN_PART_AREA and not (part & ~parent).any():
            quant = np.round(img * 255.0).astype(np.uint8)
            image = (quant.astype(np.float32) / 255.0).transpose(2, 0, 1)
            mask = part.astype(np.uint8)[None]
            return Scene(image=image, mask=mask, category=category, id=f"{category}-{int(seed):06d}")
    raise RuntimeError(f"could not draw a valid scene for {category} seed {seed}")


# -- augmentation ---------------------------------------------------------------


def _resample_nearest(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    h, w = plane.shape[-2:]
    ys = np.minimum((np.arange(out_h) + 0.5) * h / out_h, h - 1).astype(int)
    xs = np.minimum((np.arange(out_w) + 0.5) * w / out_w, w - 1).astype(int)
    return plane[..., ys[:, None], xs[None, :]]


def _fit_to(plane: np.ndarray, h: int, w: int, pad_mode: str) -> np.ndarray:
    ch, cw = plane.shape[-2:]
    if ch > h:
        top = (ch - h) // 2
        plane = plane[..., top : top + h, :]
    if cw > w:
        left = (cw - w) // 2
        plane = plane[..., :, left : left + w]
    ch, cw = plane.shape[-2:]
    if ch < h or cw < w:
        top, left = (h - ch) // 2, (w - cw) // 2
        pad = [(0, 0)] * (plane.ndim - 2) + [(top, h - ch - top), (left, w - cw - left)]
        kwargs = {} if pad_mode == "edge" else {"constant_values": 0}
        plane = np.pad(plane, pad, mode=pad_mode, **kwargs)
    return plane


def apply_augment(scene: Scene, scale: float, flip: bool, brightness: float) -> Scene:
    """Geometric ops hit image and mask identically; brightness only the image."""
    h, w = scene.image.shape[-2:]
    image, mask = scene.image, scene.mask
    if scale != 1.0:
        nh, nw = max(1, round(h * scale)), max(1, round(w * scale))
        image = _fit_to(_resample_nearest(image, nh, nw), h, w, "edge")
        mask = _fit_to(_resample_nearest(mask, nh, nw), h, w, "constant")
    if flip:
        image = image[..., ::-1]
        mask = mask[..., ::-1]
    if brightness != 1.0:
        image = np.clip(image * brightness, 0.0, 1.0)
    return Scene(
        image=np.ascontiguousarray(image, dtype=np.float32),
        mask=np.ascontiguousarray(mask, dtype=np.uint8),
        category=scene.category,
        id=scene.id,
    )


def augment(scene: Scene, rng: np.random.Generator) -> Scene:
    """Random scale/flip/brightness; redraws geometry that would crop the
    whole part out of frame (the mask must stay usable for click simulation)."""
    for _ in range(8):
        scale = float(rng.uniform(0.7, 1.4))
        flip = bool(rng.random() < 0.5)
        brightness = float(rng.uniform(0.8, 1.2))
        out = apply_augment(scene, scale, flip, brightness)
        if out.mask.sum() >= 8:
            return out
    return apply_augment(scene, 1.0, False, brightness)


# -- PPM/PGM io (binary, 8-bit) ----------------------------------------------------


def write_ppm(path: Path, image: np.ndarray) -> None:
    """image: float [3,H,W] in [0,1] or uint8 [3,H,W]."""
    if image.dtype != np.uint8:
        image = np.round(np.asarray(image) * 255.0).astype(np.uint8)
    c, h, w = image.shape
    if c != 3:
        raise ValueError("PPM wants 3 channels")
    header = f"P6\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + image.transpose(1, 2, 0).tobytes())


def write_pgm(path: Path, mask: np.ndarray) -> None:
    """mask: [1,H,W] or [H,W]; nonzero becomes 255."""
    m = np.asarray(mask)
    m = m.reshape(m.shape[-2:])
    data = np.where(m > 0, 255, 0).astype(np.uint8)
    h, w = data.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def _parse_pnm_header(blob: bytes, magic: bytes):
    if not blob.startswith(magic):
        raise ValueError(f"not a {magic.decode()} file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":  # comment to end of line
            while pos < len(blob) and blob[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(blob[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError("only 8-bit PNM supported")
    return w, h, pos


def read_ppm(path: Path) -> np.ndarray:
    """Returns float32 [3,H,W] in [0,1]."""
    blob = Path(path).read_bytes()
    w, h, pos = _parse_pnm_header(blob, b"P6")
    raw = np.frombuffer(blob, dtype=np.uint8, count=h * w * 3, offset=pos)
    return (raw.reshape(h, w, 3).transpose(2, 0, 1).astype(np.float32)) / 255.0


def read_pgm(path: Path) -> np.ndarray:
    """Returns uint8 [1,H,W] with values {0,1}."""
    blob = Path(path).read_bytes()
    w, h, pos = _parse_pnm_header(blob, b"P5")
    raw = np.frombuffer(blob, dtype=np.uint8, count=h * w, offset=pos)
    return (raw.reshape(1, h, w) > 127).astype(np.uint8)


# -- dataset directory ---------------------------------------------------------------


def build_sequences(cfg: DataConfig) -> Path:
    """Write manifest + scene/mask files; train and eval ids are disjoint."""
    if not cfg.categories:
        raise ValueError("no categories configured")
    for cat in cfg.categories:
        if cat not in _DRAWERS:
            raise ValueError(f"unknown category {cat!r}")
    root = Path(cfg.out_dir)
    (root / "scenes").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)

    base = cfg.seed * 100_000
    scenes = []
    for cat in cfg.categories:
        for split, count, offset in (
            ("train", cfg.train_per_category, 0),
            ("eval", cfg.eval_per_category, _EVAL_SEED_OFFSET),
        ):
            for k in range(count):
                seed = base + offset + k
                scene = generate_scene(cat, seed, cfg.image_size)
                write_ppm(root / "scenes" / f"{scene.id}.ppm", scene.image)
                write_pgm(root / "masks" / f"{scene.id}.pgm", scene.mask)
                scenes.append({"id": scene.id, "category": cat, "split": split, "seed": seed})

    manifest = {
        "image_size": cfg.image_size,
        "generator_seed": cfg.seed,
        "categories": list(cfg.categories),
        "scenes": scenes,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return root


class SceneDataset:
    """Read access to a generated dataset directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest_path = self.root / "manifest.json"
        if not manifest_path.exists():
            raise FileNotFoundError(f"no manifest at {manifest_path}")
        self.manifest = json.loads(manifest_path.read_text())
        self.image_size = int(self.manifest["image_size"])
        self.categories = list(self.manifest["categories"])
        self._by_id = {s["id"]: s for s in self.manifest["scenes"]}

    def ids(self, category: str | None = None, split: str | None = None) -> list[str]:
        out = []
        for s in self.manifest["scenes"]:
            if category is not None and s["category"] != category:
                continue
            if split is not None and s["split"] != split:
                continue
            out.append(s["id"])
        return out

    def __contains__(self, scene_id: str) -> bool:
        return scene_id in self._by_id

    def load(self, scene_id: str) -> Scene:
        if scene_id not in self._by_id:
            raise KeyError(f"unknown scene id {scene_id!r}")
        entry = self._by_id[scene_id]
        image = read_ppm(self.root / "scenes" / f"{scene_id}.ppm")
        mask = read_pgm(self.root / "masks" / f"{scene_id}.pgm")
        return Scene(image=image, mask=mask, category=entry["category"], id=scene_id)

    def image_bytes(self, scene_id: str) -> bytes:
        if scene_id not in self._by_id:
            raise KeyError(f"unknown scene id {scene_id!r}")
        return (self.root / "scenes" / f"{scene_id}.ppm").read_bytes()
