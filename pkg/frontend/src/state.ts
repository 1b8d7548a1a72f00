/**
 * View state and its pure transitions.
 *
 * The client never mutates segmentation state locally: markers, masks,
 * IoU and click counts only change when a server response arrives, so
 * the service stays the single source of truth.
 */

import { MaskImage, decodePgmBase64 } from "./pgm.js";
import { MaskResponse, PromptInfo, SessionInfo } from "./api.js";

export interface Marker {
  x: number;
  y: number;
  positive: boolean;
}

export interface ViewState {
  sessionId: string | null;
  sceneId: string | null;
  width: number;
  height: number;
  markers: Marker[];
  mask: MaskImage | null;
  iou: number;
  clicks: number;
  prompts: PromptInfo[];
  finalized: boolean;
}

export function emptyState(): ViewState {
  return {
    sessionId: null,
    sceneId: null,
    width: 0,
    height: 0,
    markers: [],
    mask: null,
    iou: 0,
    clicks: 0,
    prompts: [],
    finalized: false,
  };
}

export function beginSession(info: SessionInfo): ViewState {
  return {
    ...emptyState(),
    sessionId: info.session_id,
    sceneId: info.scene_id,
    width: info.width,
    height: info.height,
    prompts: info.prompts, // server score order, preserved verbatim
  };
}

/** A confirmed click: add its marker and adopt the server's mask/IoU/count. */
export function applyClickResponse(
  state: ViewState,
  click: Marker,
  resp: MaskResponse,
): ViewState {
  return {
    ...state,
    markers: [...state.markers, click],
    mask: decodePgmBase64(resp.mask_pgm_b64),
    iou: resp.iou,
    clicks: resp.clicks,
  };
}

/** A rejected click leaves the state untouched; callers show a toast. */
export function rejectClick(state: ViewState): ViewState {
  return state;
}

export function markFinalized(state: ViewState): ViewState {
  return { ...state, finalized: true };
}

export function galleryOrder(state: ViewState): string[] {
  return state.prompts.map((p) => p.scene_id);
}
