"""Encoder-decoder with additive attention, trained kernel -> original.

Desk-scale by default (single-layer GRU cells, H=64, E=32, word-level
vocabulary); the layer/width knobs accept larger settings but training
those is out of desk scope. The pieces:

  * focused loss: cross-entropy where target tokens absent from the source
    get weight 1+lambda, so the model stops degenerating to a copier
  * manual reverse-mode training (autodiff module) with Adam and optional
    dropout; deterministic per seed
  * a step-model interface (start/step) shared with the trigram LM so the
    samplers can drive either

Checkpoints: binary header (magic, version, dims) + float32 little-endian
parameter blocks in param_specs order, plus a JSON sidecar holding the
vocabulary and configs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .compressor import SentencePair
from .textprep import BOS_ID, EOS_ID, PAD_ID, UNK_ID, Vocab

MASK_NEG = -1e30


class EmptyInputError(ValueError):
    """Encoder was given no tokens."""


class EmptyDatasetError(ValueError):
    """Training was given no pairs."""


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    embed_dim: int = 32
    hidden_dim: int = 64
    layers: int = 1


@dataclass(frozen=True)
class FocusedLossConfig:
    """lam is the focusing factor lambda; weight on novel tokens is 1+lam."""

    lam: float = 9.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 2000
    learning_rate: float = 2e-3
    batch_size: int = 16
    dropout: float = 0.0
    seed: int = 0
    log_every: int = 50
    clip_norm: float = 5.0


@dataclass
class DecoderState:
    hidden: list[np.ndarray]  # one (H,) vector per layer
    memory: np.ndarray  # (T, H) encoder outputs
    keys: np.ndarray  # (T, H) projected memory for attention
    last_attention: np.ndarray | None = None


# --- parameters ---------------------------------------------------------------

_GATES = ("Wxz", "Whz", "bz", "Wxr", "Whr", "br", "Wxn", "Whn", "bn")


def param_specs(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Checkpoint parameter order; append-only to stay format-compatible."""
    V, E, H, L = cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.layers
    specs: list[tuple[str, tuple[int, ...]]] = [("embed", (V, E))]

    def gru(prefix: str, in_dim: int):
        for name in _GATES:
            if name.startswith("Wx"):
                specs.append((f"{prefix}.{name}", (in_dim, H)))
            elif name.startswith("Wh"):
                specs.append((f"{prefix}.{name}", (H, H)))
            else:
                specs.append((f"{prefix}.{name}", (H,)))

    for i in range(L):
        gru(f"enc.l{i}", E if i == 0 else H)
    for i in range(L):
        gru(f"dec.l{i}", E + H if i == 0 else H)
    specs += [
        ("att.Wq", (H, H)),
        ("att.Wk", (H, H)),
        ("att.b", (H,)),
        ("att.v", (H, 1)),
        ("out.W", (H, V)),
        ("out.b", (V,)),
    ]
    return specs


def init_params(cfg: ModelConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in param_specs(cfg):
        if len(shape) == 1:
            params[name] = np.zeros(shape)
        else:
            bound = np.sqrt(6.0 / sum(shape))
            params[name] = rng.uniform(-bound, bound, size=shape)
    return params


@dataclass
class ExpansionModel:
    config: ModelConfig
    vocab: Vocab
    params: dict[str, np.ndarray] = field(repr=False)

    # step-model contract ------------------------------------------------
    def start(self, input_ids: list[int]) -> DecoderState:
        _, state = encode(self, input_ids)
        return state

    def step(self, state: DecoderState, prev_id: int):
        return decoder_step(self, state, prev_id)


# --- focused objective ---------------------------------------------------------


def novelty_weights(target_tokens, source_tokens, lam: float) -> np.ndarray:
    """1+lam for target tokens whose surface form is absent from the source.

    Membership is tested on surface tokens, not ids, so UNK collisions
    cannot fake novelty.
    """
    src = set(source_tokens)
    return np.array([1.0 + lam * (t not in src) for t in target_tokens])


def focused_loss(step_log_probs, target_tokens, source_tokens, config: FocusedLossConfig):
    """Weighted NLL over gold log-probs; returns (loss, per-position weights)."""
    lp = np.asarray(step_log_probs, dtype=np.float64)
    if lp.shape[0] != len(target_tokens):
        raise ValueError("one gold log-prob per target position required")
    weights = novelty_weights(target_tokens, source_tokens, config.lam)
    return -(weights * lp).sum(), weights


# --- tape forward (training) ----------------------------------------------------


def _gru_step(p, prefix: str, x: ad.Tensor, h: ad.Tensor) -> ad.Tensor:
    def lin(wx, wh, b, state):
        return ad.add(ad.add(ad.matmul(x, p[f"{prefix}.{wx}"]), ad.matmul(state, p[f"{prefix}.{wh}"])), p[f"{prefix}.{b}"])

    z = ad.sigmoid(lin("Wxz", "Whz", "bz", h))
    r = ad.sigmoid(lin("Wxr", "Whr", "br", h))
    n = ad.tanh(
        ad.add(
            ad.add(ad.matmul(x, p[f"{prefix}.Wxn"]), ad.matmul(ad.mul(r, h), p[f"{prefix}.Whn"])),
            p[f"{prefix}.bn"],
        )
    )
    return ad.add(ad.mul(ad.scale_add(z, -1.0, 1.0), n), ad.mul(z, h))


def _forward_loss(
    p: dict[str, ad.Tensor],
    cfg: ModelConfig,
    src: np.ndarray,  # (B, Ts) padded ids
    src_len: np.ndarray,  # (B,)
    tgt_in: np.ndarray,  # (B, Tt) BOS-prefixed gold ids
    tgt_out: np.ndarray,  # (B, Tt) gold ids, EOS-suffixed
    weights: np.ndarray,  # (B, Tt) focusing weights, 0 on padding
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
) -> ad.Tensor:
    """Mean (over non-pad tokens) focused cross-entropy of a batch."""
    B, Ts = src.shape
    Tt = tgt_in.shape[1]
    L, H = cfg.layers, cfg.hidden_dim

    def drop(x: ad.Tensor) -> ad.Tensor:
        if dropout <= 0.0 or rng is None:
            return x
        mask = (rng.random(x.shape) >= dropout) / (1.0 - dropout)
        return ad.scale_add(x, mask)

    # encoder
    hs = [ad.Tensor(np.zeros((B, H))) for _ in range(L)]
    per_layer_steps: list[list[ad.Tensor]] = [[] for _ in range(L)]
    mem_steps = []
    for t in range(Ts):
        x = ad.embed_rows(p["embed"], src[:, t])
        for i in range(L):
            hs[i] = _gru_step(p, f"enc.l{i}", drop(x), hs[i])
            x = hs[i]
            per_layer_steps[i].append(x)
        mem_steps.append(x)
    memory = ad.stack(mem_steps, axis=1)  # (B, Ts, H)
    dec_h = [
        ad.gather_time(ad.stack(per_layer_steps[i], axis=1), src_len - 1)
        for i in range(L)
    ]

    keys = ad.add(ad.matmul(memory, p["att.Wk"]), p["att.b"])  # (B, Ts, H)
    attn_bias = np.where(
        np.arange(Ts)[None, :] < src_len[:, None], 0.0, MASK_NEG
    )  # (B, Ts)

    # decoder with teacher forcing
    gold_lp_steps = []
    for t in range(Tt):
        q = ad.reshape(ad.matmul(dec_h[-1], p["att.Wq"]), (B, 1, H))
        scores = ad.reshape(ad.matmul(ad.tanh(ad.add(keys, q)), p["att.v"]), (B, Ts))
        alpha = ad.softmax(ad.scale_add(scores, 1.0, attn_bias))
        ctx = ad.reshape(ad.matmul(ad.reshape(alpha, (B, 1, Ts)), memory), (B, H))
        emb = ad.embed_rows(p["embed"], tgt_in[:, t])
        x = ad.concat([emb, ctx], axis=1)
        for i in range(L):
            dec_h[i] = _gru_step(p, f"dec.l{i}", drop(x), dec_h[i])
            x = dec_h[i]
        logits = ad.add(ad.matmul(x, p["out.W"]), p["out.b"])
        gold_lp_steps.append(ad.gather_rows(ad.log_softmax(logits), tgt_out[:, t]))

    gold_lp = ad.stack(gold_lp_steps, axis=1)  # (B, Tt)
    n_tokens = max(1, int((weights > 0).sum()))
    total = ad.sum_all(ad.scale_add(gold_lp, weights))
    return ad.scale_add(total, -1.0 / n_tokens)


# --- training -------------------------------------------------------------------


def _batch_arrays(pairs, vocab: Vocab, lam: float, idx: np.ndarray):
    chosen = [pairs[i] for i in idx]
    src_len = np.array([len(p.kernel) for p in chosen])
    Ts = int(src_len.max())
    Tt = max(len(p.original) for p in chosen) + 1  # EOS
    B = len(chosen)
    src = np.full((B, Ts), PAD_ID, dtype=np.int64)
    tgt_in = np.full((B, Tt), PAD_ID, dtype=np.int64)
    tgt_out = np.full((B, Tt), PAD_ID, dtype=np.int64)
    weights = np.zeros((B, Tt))
    for b, pair in enumerate(chosen):
        s = vocab.ids(pair.kernel.tokens)
        o = vocab.ids(pair.original.tokens)
        src[b, : len(s)] = s
        tgt_in[b, 0] = BOS_ID
        tgt_in[b, 1 : len(o) + 1] = o
        tgt_out[b, : len(o)] = o
        tgt_out[b, len(o)] = EOS_ID
        w = novelty_weights(pair.original.tokens, pair.kernel.tokens, lam)
        weights[b, : len(o)] = w
        weights[b, len(o)] = 1.0  # EOS counts as in-source
    return src, src_len, tgt_in, tgt_out, weights


def train(
    pairs: list[SentencePair],
    vocab: Vocab,
    model_config: ModelConfig,
    loss_config: FocusedLossConfig,
    train_config: TrainConfig,
) -> tuple[ExpansionModel, list[tuple[int, float]]]:
    """Teacher-forced training with Adam; returns the model and loss history.

    Deterministic: same pairs/configs/seed give byte-identical parameters.
    """
    if not pairs:
        raise EmptyDatasetError("no training pairs")
    params = init_params(model_config, train_config.seed)
    rng = np.random.default_rng(train_config.seed + 1)
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    b1, b2, eps = 0.9, 0.999, 1e-8

    history: list[tuple[int, float]] = []
    window: list[float] = []
    for step in range(1, train_config.steps + 1):
        idx = rng.integers(0, len(pairs), size=min(train_config.batch_size, len(pairs)))
        batch = _batch_arrays(pairs, vocab, loss_config.lam, idx)
        tensors = {k: ad.Tensor(v) for k, v in params.items()}
        loss = _forward_loss(
            tensors, model_config, *batch, dropout=train_config.dropout, rng=rng
        )
        ad.backward(loss)

        grads = {k: (t.grad if t.grad is not None else np.zeros_like(t.data)) for k, t in tensors.items()}
        if train_config.clip_norm > 0:
            norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
            if norm > train_config.clip_norm:
                ratio = train_config.clip_norm / norm
                grads = {k: g * ratio for k, g in grads.items()}
        for k in params:
            adam_m[k] = b1 * adam_m[k] + (1 - b1) * grads[k]
            adam_v[k] = b2 * adam_v[k] + (1 - b2) * grads[k] ** 2
            mhat = adam_m[k] / (1 - b1**step)
            vhat = adam_v[k] / (1 - b2**step)
            params[k] -= train_config.learning_rate * mhat / (np.sqrt(vhat) + eps)

        window.append(float(loss.data))
        if step % train_config.log_every == 0 or step == train_config.steps:
            history.append((step, sum(window) / len(window)))
            window = []

    return ExpansionModel(model_config, vocab, params), history


# --- inference ------------------------------------------------------------------


def _gru_step_np(p, prefix: str, x: np.ndarray, h: np.ndarray) -> np.ndarray:
    z = _sig(x @ p[f"{prefix}.Wxz"] + h @ p[f"{prefix}.Whz"] + p[f"{prefix}.bz"])
    r = _sig(x @ p[f"{prefix}.Wxr"] + h @ p[f"{prefix}.Whr"] + p[f"{prefix}.br"])
    n = np.tanh(x @ p[f"{prefix}.Wxn"] + (r * h) @ p[f"{prefix}.Whn"] + p[f"{prefix}.bn"])
    return (1.0 - z) * n + z * h


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def encode(model: ExpansionModel, token_ids: list[int]):
    """Run the encoder; returns (memory, initial DecoderState)."""
    if len(token_ids) == 0:
        raise EmptyInputError("cannot encode an empty input")
    p, cfg = model.params, model.config
    L, H = cfg.layers, cfg.hidden_dim
    hs = [np.zeros(H) for _ in range(L)]
    memory = np.zeros((len(token_ids), H))
    for t, tid in enumerate(token_ids):
        x = p["embed"][tid]
        for i in range(L):
            hs[i] = _gru_step_np(p, f"enc.l{i}", x, hs[i])
            x = hs[i]
        memory[t] = x
    keys = memory @ p["att.Wk"] + p["att.b"]
    return memory, DecoderState(hidden=hs, memory=memory, keys=keys)


def _step_logits(model: ExpansionModel, state: DecoderState, prev_id: int):
    p = model.params
    q = state.hidden[-1] @ p["att.Wq"]
    scores = np.tanh(state.keys + q) @ p["att.v"][:, 0]
    alpha = _softmax_np(scores)
    ctx = alpha @ state.memory
    x = np.concatenate([p["embed"][prev_id], ctx])
    hidden = []
    for i in range(model.config.layers):
        h = _gru_step_np(p, f"dec.l{i}", x, state.hidden[i])
        hidden.append(h)
        x = h
    logits = x @ p["out.W"] + p["out.b"]
    return logits, DecoderState(hidden, state.memory, state.keys, alpha)


def decoder_step(model: ExpansionModel, state: DecoderState, prev_id: int):
    """One decode step; returns (log-prob vector over V, next state).

    PAD/BOS/UNK entries are -inf (never emitted); the rest log-normalizes
    to zero.
    """
    logits, new_state = _step_logits(model, state, prev_id)
    logits[[PAD_ID, BOS_ID, UNK_ID]] = -np.inf
    logp = logits - _logsumexp_np(logits)
    return logp, new_state


def _softmax_np(x):
    e = np.exp(x - x.max())
    return e / e.sum()


def _logsumexp_np(x):
    m = np.max(x[np.isfinite(x)])
    return m + np.log(np.exp(np.where(np.isfinite(x), x, -np.inf) - m).sum())


# --- checkpoints ----------------------------------------------------------------

MAGIC = b"KSEXP"
VERSION = 1


def save_model(model: ExpansionModel, path: str, loss_config: FocusedLossConfig | None = None) -> None:
    cfg = model.config
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIIII", VERSION, cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.layers))
        for name, shape in param_specs(cfg):
            arr = model.params[name]
            assert arr.shape == shape, f"{name}: {arr.shape} != {shape}"
            f.write(arr.astype("<f4").tobytes())
    sidecar = {
        "vocab": model.vocab.to_dict(),
        "model_config": asdict(cfg),
        "loss_config": asdict(loss_config) if loss_config else None,
        "param_order": [name for name, _ in param_specs(cfg)],
    }
    with open(path + ".json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, ensure_ascii=False, indent=1)


def load_model(path: str) -> ExpansionModel:
    with open(path + ".json", encoding="utf-8") as f:
        sidecar = json.load(f)
    vocab = Vocab.from_dict(sidecar["vocab"])
    cfg = ModelConfig(**sidecar["model_config"])
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise ValueError("not an expansion-model checkpoint")
        version, V, E, H, L = struct.unpack("<IIIII", f.read(20))
        if version != VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        if (V, E, H, L) != (cfg.vocab_size, cfg.embed_dim, cfg.hidden_dim, cfg.layers):
            raise ValueError("checkpoint header disagrees with sidecar config")
        params = {}
        for name, shape in param_specs(cfg):
            n = int(np.prod(shape))
            buf = f.read(4 * n)
            if len(buf) != 4 * n:
                raise ValueError("truncated checkpoint")
            params[name] = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
    return ExpansionModel(cfg, vocab, params)
