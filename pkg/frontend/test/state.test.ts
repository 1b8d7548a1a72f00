import { describe, expect, it } from "vitest";

import {
  applyClickResponse,
  beginSession,
  emptyState,
  galleryOrder,
  markFinalized,
  rejectClick,
} from "../src/state.js";
import { SessionInfo } from "../src/api.js";

function pgmB64(width: number, height: number, pixels: number[]): string {
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const bytes = new Uint8Array([...header, ...pixels]);
  return btoa(String.fromCharCode(...bytes));
}

const SESSION: SessionInfo = {
  session_id: "s1",
  category: "tree_crown",
  scene_id: "tree_crown-010000",
  width: 2,
  height: 2,
  image_url: "/scenes/tree_crown-010000/image",
  prompts: [
    { scene_id: "b", score: 0.9, image_url: "/scenes/b/image" },
    { scene_id: "a", score: 0.7, image_url: "/scenes/a/image" },
  ],
  clicks: 0,
};

describe("view state transitions", () => {
  it("begins a session with the server's prompt order verbatim", () => {
    const state = beginSession(SESSION);
    expect(state.sessionId).toBe("s1");
    expect(galleryOrder(state)).toEqual(["b", "a"]);
    expect(state.markers).toEqual([]);
    expect(state.mask).toBeNull();
  });

  it("applies a click response: marker + decoded mask + counters", () => {
    const state = beginSession(SESSION);
    const next = applyClickResponse(
      state,
      { x: 1, y: 0, positive: true },
      { mask_pgm_b64: pgmB64(2, 2, [0, 255, 0, 0]), iou: 0.5, clicks: 1, width: 2, height: 2 },
    );
    expect(next.markers).toEqual([{ x: 1, y: 0, positive: true }]);
    expect(next.clicks).toBe(1);
    expect(next.iou).toBe(0.5);
    expect([...next.mask!.data]).toEqual([0, 1, 0, 0]);
    // the original state stayed immutable
    expect(state.markers).toEqual([]);
  });

  it("a rejected click changes nothing", () => {
    const state = beginSession(SESSION);
    expect(rejectClick(state)).toBe(state);
  });

  it("finalize only flips the flag", () => {
    const state = markFinalized(beginSession(SESSION));
    expect(state.finalized).toBe(true);
    expect(state.sessionId).toBe("s1");
  });

  it("empty state is inert", () => {
    const state = emptyState();
    expect(state.sessionId).toBeNull();
    expect(state.clicks).toBe(0);
  });
});
