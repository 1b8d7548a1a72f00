/**
 * Round trip against a live service (start one with `seqclick serve`,
 * then run `SEQCLICK_SERVICE_URL=http://127.0.0.1:8008 npm run test:integration`).
 *
 * Checks the secondary acceptance criterion: a click updates the overlay in
 * under 500 ms at 64x64, the overlay foreground count equals the server
 * mask's count, and the prompt gallery order equals the server score order.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { compositeOverlay, tintedPixelCount } from "../src/overlay.js";
import { decodePgmBase64, foregroundCount } from "../src/pgm.js";
import { decodePpm } from "../src/ppm.js";
import { applyClickResponse, beginSession, galleryOrder } from "../src/state.js";

const BASE = process.env.SEQCLICK_SERVICE_URL ?? "";

describe.skipIf(!BASE)("service round trip", () => {
  const api = new ApiClient(BASE);

  it("click -> overlay within 500 ms, counts and gallery order agree", async () => {
    const scenes = await api.listScenes(undefined, "eval");
    expect(scenes.length).toBeGreaterThan(0);
    const category = scenes[0].category;
    const catScenes = scenes.filter((s) => s.category === category);

    // seed the prompt pool with two finalized sessions
    for (const scene of catScenes.slice(0, 2)) {
      const info = await api.createSession(scene.id, 5);
      await api.sendClick(info.session_id, 32, 32, true);
      await api.finalize(info.session_id);
    }

    const info = await api.createSession(catScenes[2].id, 5);
    expect(info.width).toBe(64);
    const state0 = beginSession(info);

    // prompt gallery order must equal the server's score order
    const serverOrder = info.prompts.map((p) => p.scene_id);
    expect(galleryOrder(state0)).toEqual(serverOrder);
    const scores = info.prompts.map((p) => p.score);
    expect([...scores].sort((a, b) => b - a)).toEqual(scores);

    const image = decodePpm(await api.fetchSceneImage(info.image_url));

    const started = performance.now();
    const resp = await api.sendClick(info.session_id, 30, 30, true);
    const state1 = applyClickResponse(state0, { x: 30, y: 30, positive: true }, resp);
    const composited = compositeOverlay(image, state1.mask!, 0.6);
    const elapsed = performance.now() - started;
    expect(elapsed).toBeLessThan(500);

    // overlay foreground pixels == server mask foreground pixels
    const serverMask = decodePgmBase64(resp.mask_pgm_b64);
    expect(tintedPixelCount(image, composited)).toBe(foregroundCount(serverMask));
    expect(state1.clicks).toBe(1);
    expect(resp.iou).toBeGreaterThanOrEqual(0);
  }, 20000);
});
