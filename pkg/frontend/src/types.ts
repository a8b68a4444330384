/** Wire types shared with the afbench service. Field names mirror the JSON. */

export type Point = [number, number];

export const PARSEC_NAMES = [
  "r_le",
  "x_up",
  "y_up",
  "zxx_up",
  "x_lo",
  "y_lo",
  "zxx_lo",
  "y_te",
  "dy_te",
  "alpha_te",
  "beta_te",
] as const;

export type ParsecName = (typeof PARSEC_NAMES)[number];
export type ParsecDict = Record<ParsecName, number>;

/** Indices into the canonical 257-point contour that carry drag handles. */
export const KEYPOINT_INDICES = [
  0, 21, 43, 64, 85, 107, 128, 149, 171, 192, 213, 235, 256,
] as const;

export const KEYPOINT_COUNT = KEYPOINT_INDICES.length;

export interface FoilPayload {
  name: string;
  provenance: string;
  points: Point[];
  parsec?: ParsecDict;
  smoothness?: number;
}

/** A generate candidate is a foil payload with annotations guaranteed. */
export interface Candidate extends FoilPayload {
  parsec: ParsecDict;
  smoothness: number;
}

export type EditStatus = "converged" | "max_iter" | "infeasible";

export interface EditResultPayload {
  airfoil: FoilPayload;
  achieved: ParsecDict;
  /** Per-field |achieved - target| plus "sigma_bar". */
  sigma: Record<string, number>;
  trace: number[];
  status: EditStatus;
  iterations: number;
}

export interface EditProgressEvent {
  iteration: number;
  objective: number;
  sigma_bar: number;
  airfoil: { points: Point[] };
}

export interface GeneratePayload {
  candidates: Candidate[];
}

export interface ApiError {
  code: string;
  message: string;
}

export interface Envelope<P> {
  request_id: string;
  operation: string;
  payload?: P;
  error?: ApiError;
}
