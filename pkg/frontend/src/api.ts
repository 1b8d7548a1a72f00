/** Typed client for the session service HTTP API. */

export interface PromptInfo {
  scene_id: string;
  score: number;
  image_url: string;
}

export interface SessionInfo {
  session_id: string;
  category: string;
  scene_id: string;
  width: number;
  height: number;
  image_url: string;
  prompts: PromptInfo[];
  clicks: number;
}

export interface MaskResponse {
  mask_pgm_b64: string;
  iou: number;
  clicks: number;
  width: number;
  height: number;
}

export interface SceneListEntry {
  id: string;
  category: string;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    detail: string,
  ) {
    super(detail);
  }
}

async function expectJson<T>(resp: Response): Promise<T> {
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.detail === "string") detail = body.detail;
    } catch {
      // keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(private baseUrl: string = "") {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  async health(): Promise<{ status: string; model_loaded: boolean; scenes: number }> {
    return expectJson(await fetch(this.url("/health")));
  }

  async listScenes(category?: string, split?: string): Promise<SceneListEntry[]> {
    const params = new URLSearchParams();
    if (category) params.set("category", category);
    if (split) params.set("split", split);
    const qs = params.toString();
    const body = await expectJson<{ scenes: SceneListEntry[] }>(
      await fetch(this.url(`/scenes${qs ? "?" + qs : ""}`)),
    );
    return body.scenes;
  }

  async createSession(sceneId: string, k: number): Promise<SessionInfo> {
    return expectJson(
      await fetch(this.url("/sessions"), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ scene_id: sceneId, k }),
      }),
    );
  }

  async sendClick(sessionId: string, x: number, y: number, positive: boolean): Promise<MaskResponse> {
    return expectJson(
      await fetch(this.url(`/sessions/${sessionId}/clicks`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ x, y, positive }),
      }),
    );
  }

  async finalize(sessionId: string): Promise<{ pool_size: number; warning?: string }> {
    return expectJson(await fetch(this.url(`/sessions/${sessionId}/finalize`), { method: "POST" }));
  }

  async fetchSceneImage(imageUrl: string): Promise<Uint8Array> {
    const resp = await fetch(this.url(imageUrl));
    if (!resp.ok) throw new ApiError(resp.status, `cannot fetch ${imageUrl}`);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
