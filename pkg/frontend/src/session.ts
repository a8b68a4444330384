import { ApiClient, ServiceError } from "./api.js";
import type { EditBody } from "./api.js";
import {
  KEYPOINT_INDICES,
  PARSEC_NAMES,
} from "./types.js";
import type {
  Candidate,
  EditResultPayload,
  EditStatus,
  FoilPayload,
  ParsecDict,
  ParsecName,
  Point,
} from "./types.js";

export interface SliderRow {
  name: ParsecName;
  /** User-set goal; follows achieved until the slider is touched. */
  target: number;
  /** Latest value reported by the service. */
  achieved: number;
  /** Per-field sigma from the latest edit response, if any. */
  sigma: number | null;
  infeasible: boolean;
}

interface Snapshot {
  airfoil: FoilPayload;
  achieved: ParsecDict | null;
  sliders: SliderRow[];
  sigmaBar: number | null;
  status: EditStatus | null;
  touched: ParsecName[];
}

export interface SessionOptions {
  debounceMs?: number;
  dragMaxIter?: number;
  paramMaxIter?: number;
  /** Source sent to /v1/generate before any airfoil is loaded. */
  defaultSource?: unknown;
}

function clone<T>(value: T): T {
  return structuredClone(value);
}

function isAbort(err: unknown): boolean {
  return err instanceof DOMException && err.name === "AbortError";
}

/**
 * One designer's editing state: current airfoil, drag handles, parameter
 * sliders, candidate gallery, and an undo stack of exact prior payloads.
 *
 * The session does no geometry math. Every displayed airfoil, achieved
 * parameter, and sigma value is copied verbatim from a service response;
 * the only client-side arithmetic is applying the user's drag displacement
 * to a service-provided coordinate before sending it back.
 */
export class EditorSession {
  airfoil: FoilPayload | null = null;
  achieved: ParsecDict | null = null;
  sliders: SliderRow[] = [];
  sigmaBar: number | null = null;
  status: EditStatus | null = null;
  gallery: Candidate[] = [];
  offline = false;
  toast: string | null = null;
  /** Intermediate shape streamed by a progressive edit, if one is running. */
  preview: Point[] | null = null;

  private readonly api: ApiClient;
  private readonly debounceMs: number;
  private readonly dragMaxIter: number;
  private readonly paramMaxIter: number;
  private readonly defaultSource: unknown;

  private undoStack: Snapshot[] = [];
  private touched = new Set<ParsecName>();
  private pendingHandles: Point[] | null = null;
  private dragTimer: ReturnType<typeof setTimeout> | null = null;
  private inflight: AbortController | null = null;
  private pendingOp: Promise<void> | null = null;

  constructor(api: ApiClient, opts: SessionOptions = {}) {
    this.api = api;
    this.debounceMs = opts.debounceMs ?? 150;
    this.dragMaxIter = opts.dragMaxIter ?? 20;
    this.paramMaxIter = opts.paramMaxIter ?? 24;
    this.defaultSource = opts.defaultSource ?? "naca2412";
  }

  /** Points the canvas should draw right now. */
  displayedPoints(): Point[] | null {
    return this.preview ?? this.airfoil?.points ?? null;
  }

  /** Current drag-handle positions (pending drag wins over the committed foil). */
  handles(): Point[] {
    if (this.pendingHandles !== null) return this.pendingHandles.map((p) => [p[0], p[1]]);
    if (this.airfoil === null) return [];
    return KEYPOINT_INDICES.map((i) => {
      const p = this.airfoil!.points[i]!;
      return [p[0], p[1]] as Point;
    });
  }

  undoDepth(): number {
    return this.undoStack.length;
  }

  /** Await any in-flight or just-scheduled service work. Test hook. */
  async settle(): Promise<void> {
    while (this.pendingOp !== null) {
      const op = this.pendingOp;
      await op;
      if (this.pendingOp === op) this.pendingOp = null;
    }
  }

  loadAirfoil(payload: FoilPayload): void {
    this.cancelInteraction();
    if (this.airfoil !== null) this.undoStack.push(this.snapshot());
    this.airfoil = clone(payload);
    this.achieved = payload.parsec !== undefined ? clone(payload.parsec) : null;
    this.touched.clear();
    this.sigmaBar = null;
    this.status = null;
    this.toast = null;
    this.rebuildSliders(null);
  }

  // ----- gallery -----------------------------------------------------

  async generateGallery(n: number, opts: { band?: number; seed?: number } = {}): Promise<void> {
    const body = {
      source: this.airfoil !== null ? { points: this.airfoil.points } : this.defaultSource,
      n,
      ...(opts.band !== undefined ? { band: opts.band } : {}),
      ...(opts.seed !== undefined ? { seed: opts.seed } : {}),
    };
    try {
      const payload = await this.api.generate(body);
      this.gallery = payload.candidates;
      this.offline = false;
    } catch (err) {
      if (err instanceof ServiceError) {
        this.toast = err.message;
      } else {
        this.offline = true;
        this.gallery = [];
      }
    }
  }

  galleryEnabled(): boolean {
    return !this.offline;
  }

  selectCandidate(index: number): void {
    const card = this.gallery[index];
    if (card === undefined) return;
    this.loadAirfoil(card);
  }

  // ----- keypoint dragging --------------------------------------------

  dragKeypoint(handle: number, position: Point): void {
    if (this.airfoil === null) return;
    if (handle < 0 || handle >= KEYPOINT_INDICES.length) return;
    if (this.pendingHandles === null) this.pendingHandles = this.handles();
    this.pendingHandles[handle] = [position[0], position[1]];

    if (this.dragTimer !== null) clearTimeout(this.dragTimer);
    if (!this.handlesDisplaced()) {
      // zero net displacement: no request
      this.pendingHandles = null;
      this.dragTimer = null;
      return;
    }
    this.dragTimer = setTimeout(() => {
      this.dragTimer = null;
      this.pendingOp = this.flushDrag();
    }, this.debounceMs);
  }

  private handlesDisplaced(): boolean {
    if (this.pendingHandles === null || this.airfoil === null) return false;
    return KEYPOINT_INDICES.some((pi, h) => {
      const base = this.airfoil!.points[pi]!;
      const cur = this.pendingHandles![h]!;
      return cur[0] !== base[0] || cur[1] !== base[1];
    });
  }

  private async flushDrag(): Promise<void> {
    if (this.airfoil === null || this.pendingHandles === null) return;
    const body: EditBody = {
      source: { points: this.airfoil.points },
      mode: "ek",
      target_keypoints: this.pendingHandles.map((p) => [p[0], p[1]]),
      max_iter: this.dragMaxIter,
    };
    const controller = this.takeover();
    const before = this.snapshot();
    try {
      const result = await this.api.editProgressive(
        body,
        (event) => {
          if (this.inflight === controller) this.preview = event.airfoil.points;
        },
        controller.signal,
      );
      if (this.inflight !== controller) return;
      this.commit(before, result, null);
    } catch (err) {
      if (isAbort(err) || this.inflight !== controller) return;
      this.toast = err instanceof Error ? err.message : String(err);
      this.preview = null;
      this.pendingHandles = null;
      this.inflight = null;
    }
  }

  // ----- parameter sliders --------------------------------------------

  setParameterTarget(name: ParsecName, value: number): void {
    const row = this.sliders.find((r) => r.name === name);
    if (row === undefined) return;
    row.target = value;
    this.touched.add(name);
  }

  /** Slider release: issue edit_ep unless the target equals the achieved value. */
  commitParameter(name: ParsecName): Promise<void> {
    const row = this.sliders.find((r) => r.name === name);
    if (row === undefined || this.airfoil === null) return Promise.resolve();
    if (row.target === row.achieved) return Promise.resolve();

    const targets: Record<string, number> = {};
    for (const r of this.sliders) targets[r.name] = r.target;
    const body: EditBody = {
      source: { points: this.airfoil.points },
      mode: "ep",
      target_parsec: targets,
      max_iter: this.paramMaxIter,
    };
    const controller = this.takeover();
    const before = this.snapshot();
    const op = (async () => {
      try {
        const result = await this.api.edit(body, controller.signal);
        if (this.inflight !== controller) return;
        this.commit(before, result, name);
      } catch (err) {
        if (isAbort(err) || this.inflight !== controller) return;
        this.toast = err instanceof Error ? err.message : String(err);
        this.inflight = null;
      }
    })();
    this.pendingOp = op;
    return op;
  }

  // ----- undo ----------------------------------------------------------

  undo(): void {
    this.cancelInteraction();
    const snap = this.undoStack.pop();
    if (snap === undefined) return;
    this.airfoil = snap.airfoil;
    this.achieved = snap.achieved;
    this.sliders = snap.sliders;
    this.sigmaBar = snap.sigmaBar;
    this.status = snap.status;
    this.touched = new Set(snap.touched);
    this.toast = null;
  }

  // ----- internals -----------------------------------------------------

  private snapshot(): Snapshot {
    return clone({
      airfoil: this.airfoil!,
      achieved: this.achieved,
      sliders: this.sliders,
      sigmaBar: this.sigmaBar,
      status: this.status,
      touched: [...this.touched],
    });
  }

  /** Abort whatever is in flight; the newer interaction owns the session. */
  private takeover(): AbortController {
    if (this.inflight !== null) this.inflight.abort();
    const controller = new AbortController();
    this.inflight = controller;
    return controller;
  }

  private cancelInteraction(): void {
    if (this.dragTimer !== null) {
      clearTimeout(this.dragTimer);
      this.dragTimer = null;
    }
    if (this.inflight !== null) {
      this.inflight.abort();
      this.inflight = null;
    }
    this.pendingHandles = null;
    this.preview = null;
  }

  private commit(
    before: Snapshot,
    result: EditResultPayload,
    committed: ParsecName | null,
  ): void {
    this.undoStack.push(before);
    this.airfoil = result.airfoil;
    this.achieved = result.achieved;
    this.sigmaBar = result.sigma["sigma_bar"] ?? null;
    this.status = result.status;
    this.preview = null;
    this.pendingHandles = null;
    this.inflight = null;
    this.offline = false;
    this.toast = null;
    this.rebuildSliders(result.sigma);
    if (result.status === "infeasible" && committed !== null) {
      const row = this.sliders.find((r) => r.name === committed);
      if (row !== undefined) row.infeasible = true;
    }
  }

  private rebuildSliders(sigma: Record<string, number> | null): void {
    const prior = new Map(this.sliders.map((r) => [r.name, r] as const));
    this.sliders = PARSEC_NAMES.map((name) => {
      const achieved = this.achieved?.[name] ?? Number.NaN;
      const keep = this.touched.has(name) ? prior.get(name)?.target : undefined;
      return {
        name,
        target: keep ?? achieved,
        achieved,
        sigma: sigma?.[name] ?? null,
        infeasible: false,
      };
    });
  }
}
