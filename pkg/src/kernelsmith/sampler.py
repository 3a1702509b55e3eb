"""Decoding strategies over the step-model contract.

Methods: greedy, width-N beam, fixed-temperature top-k sampling, and the
controlled novelty-curve samplers. The curve samplers ration a total
novelty budget over the expected output length: each step solves the
parabola

    tau(x) = b^2 (x - 0.5)^2 + c        x = step / expected_length

for the free parameter (the other is a fixed constant) so that the area
remaining under the curve equals the remaining novelty budget, then
samples at the clamped temperature and accumulates the per-word novelty
actually spent. Per-word novelty is the gap between the temperature-
corrected softmax maximum and the chosen token's probability.

The exponential and windowed-accumulator variants are reconstructions
from prose-level descriptions; their exact published forms are unknown
(see README).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .compressor import round_half_up
from .textprep import BOS_ID, EOS_ID, Sentence, Vocab

METHODS = ("greedy", "beam", "random", "parabola_b2", "parabola_c", "exponential", "windowed")


class EndOfCurveError(ValueError):
    """Curve solve requested at a = 1 where the parabola legs vanish."""


class NonTerminatingError(RuntimeError):
    """No candidate produced EOS within max_len; partial results attached."""

    def __init__(self, results):
        super().__init__("decode did not terminate within the length limit")
        self.results = results


@dataclass(frozen=True)
class DecodeConfig:
    method: str = "parabola_c"
    base_temperature: float = 0.7
    beam_width: int = 10
    top_k: int = 40
    target_total_novelty: float | None = None  # None: 0.1 * expected length
    expansion_factor: float = 1.65
    max_len: int = 50
    tau_floor: float = 0.1
    tau_ceiling: float = 2.0
    b2_const: float = 0.5  # fixed b^2 while solving for c
    c_const: float = 3.0  # fixed c while solving for b^2
    repeat_penalty_content: float = 15.0
    repeat_penalty_stopword: float = 10.0
    repeat_history: int = 5
    window_size: int = 3
    exp_kappa: float = 0.5
    exp_alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.top_k < 1 or self.beam_width < 1:
            raise ValueError("top_k and beam_width must be >= 1")
        if self.tau_floor <= 0 or self.tau_ceiling < self.tau_floor:
            raise ValueError("need 0 < tau_floor <= tau_ceiling")
        if self.expansion_factor < 1:
            raise ValueError("expansion_factor must be >= 1")
        if min(self.repeat_penalty_content, self.repeat_penalty_stopword) < 0:
            raise ValueError("penalties must be >= 0")
        if self.base_temperature <= 0:
            raise ValueError("base_temperature must be > 0")


@dataclass
class CurveState:
    """Running controller state for the novelty-curve methods."""

    step: int = 0
    expected_length: int = 1
    accumulated: float = 0.0
    b2: float = 0.0
    c: float = 0.0

    @property
    def a(self) -> float:
        return self.step / self.expected_length

    def remaining(self, target: float) -> float:
        return target - self.accumulated


@dataclass
class DecodeTrace:
    tokens: list[str] = field(default_factory=list)
    tau: list[float] = field(default_factory=list)
    novelty: list[float] = field(default_factory=list)
    window: list[float] = field(default_factory=list)
    candidates: list[list[tuple[str, float]]] = field(default_factory=list)

    def total_novelty(self) -> float:
        return sum(self.novelty)

    def to_dict(self) -> dict:
        return {
            "tokens": self.tokens,
            "tau": self.tau,
            "novelty": self.novelty,
            "window": self.window,
            "candidates": [
                [{"token": t, "p": p} for t, p in step] for step in self.candidates
            ],
        }


@dataclass
class DecodeResult:
    tokens: tuple[str, ...]
    trace: DecodeTrace
    terminated: bool
    score: float | None = None

    def sentence(self, source_id: str = "") -> Sentence:
        return Sentence(self.tokens, source_id)


# --- curve algebra -------------------------------------------------------------


def solve_parabola_b2(a: float, c: float, t: float) -> float:
    """b^2 such that the area under the parabola from a to 1 equals t.

    The result may be negative (an inverted parabola); temperature
    clamping downstream makes that admissible.
    """
    if not 0 <= a <= 1:
        raise ValueError("a must be in [0, 1)")
    if a == 1:
        raise EndOfCurveError("no curve remains at a = 1")
    return 12 * (c - a * c - t) / (4 * a**3 - 6 * a**2 + 3 * a - 1)


def solve_parabola_c(a: float, b2: float, t: float) -> float:
    """c such that the area under the parabola from a to 1 equals t."""
    if not 0 <= a <= 1:
        raise ValueError("a must be in [0, 1)")
    if a == 1:
        raise EndOfCurveError("no curve remains at a = 1")
    return (-4 * a**3 * b2 + 6 * a**2 * b2 - 3 * a * b2 + b2 - 12 * t) / (12 * (a - 1))


def curve_tau(b2: float, c: float, x: float) -> float:
    return b2 * (x - 0.5) ** 2 + c


def token_novelty(log_probs: np.ndarray, tau: float, chosen: int) -> float:
    """Gap between the tau-corrected softmax maximum and the chosen token."""
    if tau <= 0:
        raise ValueError("tau must be > 0")
    probs = _softmax(log_probs / tau)
    return float(probs.max() - probs[chosen])


def apply_repeat_penalty(
    log_probs: np.ndarray,
    recent_ids,
    vocab: Vocab,
    content_penalty: float = 15.0,
    stopword_penalty: float = 10.0,
) -> np.ndarray:
    """Subtract the penalty from recently emitted tokens, then renormalize.

    A no-op (bit-identical input) when nothing is penalized, so zero
    penalties reduce sampling to the plain unpenalized form exactly.
    """
    out = log_probs.copy()
    touched = False
    for tid in set(recent_ids):
        pen = stopword_penalty if vocab.is_stopword(tid) else content_penalty
        if pen > 0 and np.isfinite(out[tid]):
            out[tid] -= pen
            touched = True
    if touched:
        out -= _logsumexp(out)
    return out


def _softmax(x: np.ndarray) -> np.ndarray:
    finite = np.isfinite(x)
    m = x[finite].max()
    e = np.where(finite, np.exp(np.where(finite, x, m) - m), 0.0)
    return e / e.sum()


def _logsumexp(x: np.ndarray) -> float:
    finite = np.isfinite(x)
    m = x[finite].max()
    return float(m + np.log(np.exp(np.where(finite, x, -np.inf) - m).sum()))


# --- decoding -------------------------------------------------------------------


def expected_output_length(input_len: int, config: DecodeConfig) -> int:
    return min(max(round_half_up(config.expansion_factor * input_len), 1), config.max_len)


def _input_ids(step_model, tokens) -> list[int]:
    if isinstance(tokens, Sentence):
        tokens = tokens.tokens
    if len(tokens) == 0:
        raise ValueError("decode needs a non-empty input")
    return [t if isinstance(t, int) else step_model.vocab.id(t) for t in tokens]


def _top_candidates(log_probs: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries, ascending by id (deterministic)."""
    k = min(k, int(np.isfinite(log_probs).sum()))
    idx = np.argpartition(log_probs, -k)[-k:]
    return np.sort(idx)


def _sample(rng: np.random.Generator, probs: np.ndarray) -> int:
    """Inverse-CDF draw consuming exactly one uniform variate.

    Zero-probability entries do not perturb the draw, so restricting to a
    candidate subset and sampling the full vector with zeros agree exactly.
    """
    cdf = np.cumsum(probs)
    u = rng.random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), len(probs) - 1))


def _record(trace, vocab, token_id, tau, nov, window_val, cand_ids, cand_probs):
    order = np.argsort(-cand_probs)
    trace.tokens.append(vocab.token(token_id))
    trace.tau.append(float(tau))
    trace.novelty.append(float(nov))
    trace.window.append(float(window_val))
    trace.candidates.append(
        [(vocab.token(int(cand_ids[i])), float(cand_probs[i])) for i in order]
    )


def decode(step_model, input_tokens, config: DecodeConfig, seed: int | None = None):
    """Decode an expansion of the input with the configured method.

    Returns one DecodeResult, or a ranked list of them for beam search.
    Raises NonTerminatingError (with partial results attached) when no
    candidate emitted EOS within max_len; callers turn that into a filter
    flag rather than a silent drop.
    """
    ids = _input_ids(step_model, input_tokens)
    if config.method == "greedy":
        return _decode_greedy(step_model, ids, config)
    if config.method == "beam":
        return _decode_beam(step_model, ids, config)
    return _decode_sampling(step_model, ids, config, config.seed if seed is None else seed)


def _clamp_tau(tau: float, config: DecodeConfig) -> float:
    return min(max(tau, config.tau_floor), config.tau_ceiling)


def _decode_greedy(model, ids, config) -> DecodeResult:
    state = model.start(ids)
    prev = BOS_ID
    trace = DecodeTrace()
    for _ in range(config.max_len):
        logp, state = model.step(state, prev)
        choice = int(np.argmax(logp))
        if choice == EOS_ID:
            return DecodeResult(tuple(trace.tokens), trace, True)
        cand = _top_candidates(logp, config.top_k)
        _record(trace, model.vocab, choice, 1.0, token_novelty(logp, 1.0, choice), 0.0,
                cand, _softmax(logp)[cand])
        prev = choice
    raise NonTerminatingError([DecodeResult(tuple(trace.tokens), trace, False)])


def _decode_sampling(model, ids, config, seed) -> DecodeResult:
    rng = np.random.default_rng(seed)
    vocab = model.vocab
    expected = expected_output_length(len(ids), config)
    target = (
        0.1 * expected
        if config.target_total_novelty is None
        else config.target_total_novelty
    )
    curve = CurveState(expected_length=expected)
    if config.method == "windowed":
        # constant parabola spending the whole budget, truncated by clamping
        curve.b2 = config.b2_const
        curve.c = solve_parabola_c(0.0, config.b2_const, target)
    window: deque[float] = deque(maxlen=config.window_size)
    target_window = target / expected * config.window_size
    recent: deque[int] = deque(maxlen=config.repeat_history)

    state = model.start(ids)
    prev = BOS_ID
    trace = DecodeTrace()
    for step in range(config.max_len):
        logp, state = model.step(state, prev)
        penalized = apply_repeat_penalty(
            logp, recent, vocab,
            config.repeat_penalty_content, config.repeat_penalty_stopword,
        )

        curve.step = step
        x = curve.a
        t_rem = curve.remaining(target)
        if config.method == "random":
            tau = config.base_temperature
        elif config.method == "exponential":
            tau = config.exp_kappa * math.exp(config.exp_alpha * t_rem)
        elif config.method == "parabola_b2":
            if x < 1:
                curve.b2 = solve_parabola_b2(x, config.c_const, t_rem)
                curve.c = config.c_const
            tau = curve_tau(curve.b2, curve.c, x)
        elif config.method == "parabola_c":
            if x < 1:
                curve.b2 = config.b2_const
                curve.c = solve_parabola_c(x, config.b2_const, t_rem)
            tau = curve_tau(curve.b2, curve.c, x)
        else:  # windowed: constant parabola scaled by the window accumulator
            actual = sum(window)
            ratio = target_window / actual if actual > 0 else 2.0
            tau = curve_tau(curve.b2, curve.c, min(x, 1.0)) * min(max(ratio, 0.5), 2.0)
        tau = _clamp_tau(tau, config)

        cand = _top_candidates(penalized, config.top_k)
        cand_probs = _softmax(penalized[cand] / tau)
        choice = int(cand[_sample(rng, cand_probs)])
        if choice == EOS_ID:
            return DecodeResult(tuple(trace.tokens), trace, True)
        nov = token_novelty(penalized, tau, choice)
        curve.accumulated += nov
        window.append(nov)
        _record(trace, vocab, choice, tau, nov, sum(window), cand, cand_probs)
        recent.append(choice)
        prev = choice
    raise NonTerminatingError([DecodeResult(tuple(trace.tokens), trace, False)])


def _decode_beam(model, ids, config) -> list[DecodeResult]:
    width = config.beam_width
    start = model.start(ids)
    live = [(0.0, [], start, BOS_ID)]
    finished: list[tuple[float, list[int]]] = []
    for _ in range(config.max_len):
        if not live or len(finished) >= width:
            break
        grown = []
        for score, tokens, state, prev in live:
            logp, new_state = model.step(state, prev)
            for tid in _top_candidates(logp, width):
                tid = int(tid)
                cand_score = score + float(logp[tid])
                if tid == EOS_ID:
                    finished.append((cand_score / (len(tokens) + 1), tokens))
                else:
                    grown.append((cand_score, tokens + [tid], new_state, tid))
        grown.sort(key=lambda b: -b[0])
        live = grown[:width]

    def replay(token_ids, terminated, score) -> DecodeResult:
        trace = DecodeTrace()
        state = model.start(ids)
        prev = BOS_ID
        for tid in token_ids:
            logp, state = model.step(state, prev)
            cand = _top_candidates(logp, config.top_k)
            _record(trace, model.vocab, tid, 1.0, token_novelty(logp, 1.0, tid), 0.0,
                    cand, _softmax(logp)[cand])
            prev = tid
        return DecodeResult(tuple(trace.tokens), trace, terminated, score)

    if finished:
        finished.sort(key=lambda b: -b[0])
        return [replay(toks, True, score) for score, toks in finished[:width]]
    results = [
        replay(toks, False, score / max(len(toks), 1)) for score, toks, _, _ in live
    ]
    raise NonTerminatingError(results)


# --- output filters -------------------------------------------------------------


def repetitiveness_filter(tokens) -> bool:
    """True when acceptable; False when a block of >= 10 tokens reoccurs
    with start-to-start distance <= 15."""
    if isinstance(tokens, Sentence):
        tokens = tokens.tokens
    n = len(tokens)
    for i in range(n):
        for j in range(i + 1, min(i + 15, n - 1) + 1):
            run = 0
            while j + run < n and tokens[i + run] == tokens[j + run]:
                run += 1
                if run >= 10:
                    break
            if run >= 10:
                return False
    return True
