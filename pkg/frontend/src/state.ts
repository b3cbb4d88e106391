/**
 * Session state and interaction flow.
 *
 * Invariants kept here:
 *  - the local click list mirrors the server after every acknowledged
 *    mutation (a rejected click is never added locally);
 *  - mutations run one at a time in submission order (rapid clicks queue);
 *  - map refetches are coalesced: only the response matching the newest
 *    request generation is shown.
 */
import { ApiError, Polarity, SessionApi, SessionMeta, SessionSource } from "./api.js";
import { decodeGrayPng } from "./png16.js";

export interface UiClick {
  row: number;
  col: number;
  polarity: Polarity;
}

export interface UiSessionState {
  meta: SessionMeta | null;
  clicks: UiClick[];
  method: string;
  /** null renders the continuous map; a number renders the binarized mask. */
  threshold: number | null;
  opacity: number;
  lastLatencyMs: number | null;
  serverHash: string | null;
  busy: boolean;
}

export interface ControllerEvents {
  onState(state: UiSessionState): void;
  /** Newest decoded 16-bit map for the current state, or null before clicks. */
  onOverlay(map: Uint16Array | null): void;
  onError(message: string): void;
}

export class SessionController {
  state: UiSessionState = {
    meta: null,
    clicks: [],
    method: "sa",
    threshold: null,
    opacity: 0.6,
    lastLatencyMs: null,
    serverHash: null,
    busy: false,
  };

  private chain: Promise<unknown> = Promise.resolve();
  private refetchGeneration = 0;

  constructor(private api: SessionApi, private events: ControllerEvents) {}

  private emit(): void {
    this.events.onState(this.state);
  }

  /** Serialize mutations: at most one in flight, submission order kept. */
  private enqueue<T>(job: () => Promise<T>): Promise<T> {
    const run = this.chain.then(job, job);
    this.chain = run.then(
      () => undefined,
      () => undefined,
    );
    return run;
  }

  async open(source: SessionSource): Promise<void> {
    try {
      const meta = await this.api.createSession(source);
      this.state = {
        ...this.state,
        meta,
        clicks: [],
        serverHash: meta.state_hash,
        lastLatencyMs: null,
      };
      if (!meta.methods.includes(this.state.method)) {
        this.state.method = meta.methods[0];
      }
      this.emit();
      this.events.onOverlay(null);
    } catch (err) {
      this.surface(err);
      throw err;
    }
  }

  clickAt(row: number, col: number, polarity: Polarity): Promise<void> {
    return this.enqueue(async () => {
      const meta = this.state.meta;
      if (!meta) return;
      this.state.busy = true;
      this.emit();
      try {
        const ack = await this.api.addClick(meta.id, row, col, polarity);
        this.state.clicks = [...this.state.clicks, { row, col, polarity }];
        this.state.serverHash = ack.state_hash;
      } catch (err) {
        this.surface(err); // rejected clicks are not added locally
        return;
      } finally {
        this.state.busy = false;
        this.emit();
      }
      await this.refetchMap();
    });
  }

  undo(): Promise<void> {
    return this.enqueue(async () => {
      const meta = this.state.meta;
      if (!meta || this.state.clicks.length === 0) return;
      try {
        const ack = await this.api.undoClick(meta.id);
        this.state.clicks = this.state.clicks.slice(0, -1);
        this.state.serverHash = ack.state_hash;
      } catch (err) {
        this.surface(err);
        return;
      } finally {
        this.emit();
      }
      await this.refetchMap();
    });
  }

  setMethod(method: string): Promise<void> {
    this.state.method = method;
    this.emit();
    return this.refetchMap();
  }

  /** Client-side only: the cached map is re-binarized by the view. */
  setThreshold(threshold: number | null): void {
    this.state.threshold = threshold;
    this.emit();
  }

  setOpacity(opacity: number): void {
    this.state.opacity = opacity;
    this.emit();
  }

  hasPositiveClicks(): boolean {
    return this.state.clicks.some((c) => c.polarity === "positive");
  }

  /** Fetch the current method's map; stale responses are dropped. */
  async refetchMap(): Promise<void> {
    const meta = this.state.meta;
    const generation = ++this.refetchGeneration;
    if (!meta || !this.hasPositiveClicks()) {
      this.events.onOverlay(null);
      return;
    }
    const started = Date.now();
    try {
      const png = await this.api.fetchMapPng(meta.id, this.state.method);
      if (generation !== this.refetchGeneration) return;
      const decoded = await decodeGrayPng(png);
      if (generation !== this.refetchGeneration) return;
      this.state.lastLatencyMs = Date.now() - started;
      this.emit();
      this.events.onOverlay(decoded.data);
    } catch (err) {
      if (generation === this.refetchGeneration) this.surface(err);
    }
  }

  /** Compare the local click list against the server's view of the session. */
  async reconcile(): Promise<boolean> {
    const meta = this.state.meta;
    if (!meta) return true;
    const fresh = await this.api.getSession(meta.id);
    return (
      fresh.clicks === this.state.clicks.length && fresh.state_hash === this.state.serverHash
    );
  }

  private surface(err: unknown): void {
    if (err instanceof ApiError) {
      this.events.onError(`${err.code}: ${err.message}`);
    } else {
      this.events.onError(String(err));
    }
  }
}
