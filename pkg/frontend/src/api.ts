/** Thin typed client for the session service's HTTP API. */

export interface SessionMeta {
  id: string;
  height: number;
  width: number;
  bands: number;
  wavelength_min: number;
  wavelength_max: number;
  methods: string[];
  clicks: number;
  state_hash: string;
}

export interface ClickAck {
  clicks: number;
  state_hash: string;
}

export type Polarity = "positive" | "negative";

export interface SessionSource {
  cubePath?: string;
  sceneSpec?: object;
  rgbMapPath?: string;
}

export class ApiError extends Error {
  constructor(public code: number, message: string) {
    super(message);
  }
}

/** The slice of the HTTP client the session controller depends on. */
export interface SessionApi {
  createSession(source: SessionSource): Promise<SessionMeta>;
  getSession(id: string): Promise<SessionMeta>;
  addClick(id: string, row: number, col: number, polarity: Polarity): Promise<ClickAck>;
  undoClick(id: string): Promise<ClickAck>;
  fetchRgbPng(id: string): Promise<Uint8Array>;
  fetchMapPng(id: string, method: string, threshold?: number): Promise<Uint8Array>;
}

async function raise(response: Response): Promise<never> {
  let message = response.statusText;
  try {
    const body = (await response.json()) as { message?: string };
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(response.status, message);
}

export class ApiClient implements SessionApi {
  constructor(private base: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) await raise(response);
    return (await response.json()) as T;
  }

  private async bytes(path: string): Promise<Uint8Array> {
    const response = await fetch(this.base + path);
    if (!response.ok) await raise(response);
    return new Uint8Array(await response.arrayBuffer());
  }

  health(): Promise<{ status: string }> {
    return this.json("/health");
  }

  createSession(source: SessionSource): Promise<SessionMeta> {
    const body: Record<string, unknown> = {};
    if (source.cubePath !== undefined) body.cube_path = source.cubePath;
    if (source.sceneSpec !== undefined) body.scene_spec = source.sceneSpec;
    if (source.rgbMapPath !== undefined) body.rgb_map_path = source.rgbMapPath;
    return this.json("/sessions", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  getSession(id: string): Promise<SessionMeta> {
    return this.json(`/sessions/${id}`);
  }

  addClick(id: string, row: number, col: number, polarity: Polarity): Promise<ClickAck> {
    return this.json(`/sessions/${id}/clicks`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ row, col, polarity }),
    });
  }

  undoClick(id: string): Promise<ClickAck> {
    return this.json(`/sessions/${id}/clicks/last`, { method: "DELETE" });
  }

  fetchRgbPng(id: string): Promise<Uint8Array> {
    return this.bytes(`/sessions/${id}/rgb`);
  }

  fetchMapPng(id: string, method: string, threshold?: number): Promise<Uint8Array> {
    const query = threshold === undefined ? "" : `&threshold=${threshold}`;
    return this.bytes(`/sessions/${id}/map?method=${encodeURIComponent(method)}${query}`);
  }
}
