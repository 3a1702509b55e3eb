// Wire types for the expansion service JSON API.

export interface MethodsPayload {
  methods: string[];
  defaults: Record<string, number | string | null>;
}

export interface TraceCandidate {
  token: string;
  p: number;
}

export interface Trace {
  tokens: string[];
  tau: number[];
  novelty: number[];
  window: number[];
  candidates: TraceCandidate[][];
}

export interface MetricReport {
  rouge1: number;
  rouge2: number;
  bleu2: number;
  bleu4: number;
  dist1: number;
  dist2: number;
  expansion_ratio: number;
  added_words: number;
  input_len: number;
  output_len: number;
  frechet: number;
  cosine_dist: number;
}

export interface Candidate {
  tokens: string[];
  text: string;
  trace: Trace;
  metrics: MetricReport;
  filtered: boolean;
  filter_reason: "non-terminating" | "repetitive" | null;
  seed: number;
}

export interface ExpansionResponse {
  input_tokens: string[];
  input_text: string;
  method: string;
  seed: number;
  candidates: Candidate[];
}

export interface ExpansionRequest {
  sentence: string;
  method: string;
  candidate_count: number;
  seed: number;
  overrides: Record<string, number>;
}

export interface CompressResponse {
  kernel: string;
  kernel_tokens: string[];
  input_tokens: string[];
  achieved_rate: number;
}

export interface ApiError {
  code: string;
  message: string;
}
