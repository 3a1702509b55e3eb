import type { Candidate, ExpansionResponse, MethodsPayload, Trace } from "../src/types.js";

export const METHODS: MethodsPayload = {
  methods: ["greedy", "beam", "random", "parabola_b2", "parabola_c", "exponential", "windowed"],
  defaults: {
    method: "parabola_c",
    base_temperature: 0.7,
    beam_width: 10,
    top_k: 40,
    target_total_novelty: null,
    expansion_factor: 1.65,
    max_len: 50,
    tau_floor: 0.1,
    tau_ceiling: 2.0,
    b2_const: 0.5,
    c_const: 3.0,
    repeat_penalty_content: 15,
    repeat_penalty_stopword: 10,
    repeat_history: 5,
    window_size: 3,
    exp_kappa: 0.5,
    exp_alpha: 1.0,
    seed: 0,
  },
};

export function makeTrace(tokens: string[], tau?: number[], window?: number[]): Trace {
  return {
    tokens,
    tau: tau ?? tokens.map(() => 1.0),
    novelty: tokens.map(() => 0.05),
    window: window ?? tokens.map(() => 0.15),
    candidates: tokens.map((t) => [{ token: t, p: 0.9 }]),
  };
}

export function makeCandidate(tokens: string[], seed = 0, overrides: Partial<Candidate> = {}): Candidate {
  return {
    tokens,
    text: tokens.join(" "),
    trace: makeTrace(tokens),
    metrics: {
      rouge1: 1,
      rouge2: 1,
      bleu2: 1,
      bleu4: 1,
      dist1: 0.25,
      dist2: 0.3,
      expansion_ratio: 1.6,
      added_words: 3,
      input_len: tokens.length - 3,
      output_len: tokens.length,
      frechet: 2.5,
      cosine_dist: 0.1,
    },
    filtered: false,
    filter_reason: null,
    seed,
    ...overrides,
  };
}

export function makeResponse(inputTokens: string[], candidates: Candidate[], method = "parabola_c", seed = 0): ExpansionResponse {
  return {
    input_tokens: inputTokens,
    input_text: inputTokens.join(" "),
    method,
    seed,
    candidates,
  };
}
