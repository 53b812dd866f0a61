"""Single-block multi-head self-attention next-activity predictor.

Everything is plain numpy with a hand-written backward pass. The block
is: embedding + sinusoidal positions -> multi-head attention -> residual
+ layer norm -> position-wise feed-forward -> residual + layer norm ->
mean pooling over positions -> softmax output layer. Output classes are
the business activities plus END; PAD is an input-only symbol.

Two attention modes exist: ``learned`` (normal training) and
``frozen_uniform``, where every attention row is exactly the uniform
distribution and the query/key projections receive no gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict, replace

import numpy as np

from .errors import (
    CheckpointError,
    DivergenceError,
    TrainingDataError,
)
from .eventlog import EventLog, Prefix, extract_prefixes

ATTENTION_LEARNED = "learned"
ATTENTION_FROZEN_UNIFORM = "frozen_uniform"

_LN_EPS = 1e-5


@dataclass(frozen=True)
class ModelConfig:
    d_k: int = 36
    h: int = 4
    max_len: int = 64
    ff_dim: int = 64
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 1e-3
    seed: int = 0
    attention_mode: str = ATTENTION_LEARNED
    pad_dropout: float = 0.1

    def __post_init__(self):
        if self.h < 1:
            raise ValueError("need at least one attention head")
        if self.d_k % self.h != 0:
            raise ValueError(f"d_k={self.d_k} not divisible by h={self.h}")
        if self.attention_mode not in (ATTENTION_LEARNED, ATTENTION_FROZEN_UNIFORM):
            raise ValueError(f"unknown attention_mode {self.attention_mode!r}")


def sinusoidal_positions(max_len: int, dim: int) -> np.ndarray:
    pos = np.arange(max_len)[:, None].astype(float)
    i = np.arange(dim)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / dim)
    enc = np.zeros((max_len, dim))
    enc[:, 0::2] = np.sin(angle[:, 0::2])
    enc[:, 1::2] = np.cos(angle[:, 1::2])
    return enc


class TransformerModel:
    """Trained (or freshly initialized) predictor with attention capture."""

    def __init__(self, config: ModelConfig, activity_labels: list[str], params=None, rng=None):
        self.config = config
        self.activity_labels = list(activity_labels)
        self.num_activities = len(self.activity_labels)
        self.pad_id = self.num_activities
        self.end_id = self.num_activities + 1
        self.vocab_size = self.num_activities + 2      # activities + PAD + END
        self.num_classes = self.num_activities + 1     # activities + END
        self.pos_enc = sinusoidal_positions(config.max_len, config.d_k)
        if params is not None:
            self.params = params
        else:
            if rng is None:
                rng = np.random.default_rng(config.seed)
            self.params = self._init_params(rng)
        self._check_shapes()

    # ---------------------------------------------------------------- setup

    def _init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        d, h, ff = self.config.d_k, self.config.h, self.config.ff_dim
        dh = d // h
        C, V = self.num_classes, self.vocab_size

        def glorot(*shape):
            limit = np.sqrt(6.0 / (shape[-2] + shape[-1]))
            return rng.uniform(-limit, limit, size=shape)

        params = {
            "embed": rng.normal(0.0, 0.1, size=(V, d)),
            "Wq": glorot(h, d, dh),
            "Wk": glorot(h, d, dh),
            "Wv": glorot(h, d, dh),
            "Wo": glorot(d, d),
            "ln1_g": np.ones(d), "ln1_b": np.zeros(d),
            "W1": glorot(d, ff), "b1": np.zeros(ff),
            "W2": glorot(ff, d), "b2": np.zeros(d),
            "ln2_g": np.ones(d), "ln2_b": np.zeros(d),
            "Wout": glorot(d, C), "bout": np.zeros(C),
        }
        if self.config.attention_mode == ATTENTION_FROZEN_UNIFORM:
            params["Wq"] = np.zeros_like(params["Wq"])
            params["Wk"] = np.zeros_like(params["Wk"])
        return params

    def expected_shapes(self) -> dict[str, tuple[int, ...]]:
        d, h, ff = self.config.d_k, self.config.h, self.config.ff_dim
        dh = d // h
        C, V = self.num_classes, self.vocab_size
        return {
            "embed": (V, d),
            "Wq": (h, d, dh), "Wk": (h, d, dh), "Wv": (h, d, dh), "Wo": (d, d),
            "ln1_g": (d,), "ln1_b": (d,),
            "W1": (d, ff), "b1": (ff,), "W2": (ff, d), "b2": (d,),
            "ln2_g": (d,), "ln2_b": (d,),
            "Wout": (d, C), "bout": (C,),
        }

    def _check_shapes(self):
        for name, shape in self.expected_shapes().items():
            if name not in self.params:
                raise CheckpointError(f"missing parameter {name}")
            got = self.params[name].shape
            if tuple(got) != shape:
                raise CheckpointError(f"parameter {name}: expected shape {shape}, got {got}")

    @property
    def frozen_attention(self) -> bool:
        return self.config.attention_mode == ATTENTION_FROZEN_UNIFORM

    def frozen_param_names(self) -> set[str]:
        return {"Wq", "Wk"} if self.frozen_attention else set()

    def num_params(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    # -------------------------------------------------------------- forward

    def _forward_batch(self, ids: np.ndarray, keep_cache: bool = False,
                       masked_positions=None):
        """Forward a (B, T) id batch.

        ``masked_positions`` zeroes the given rows/columns of every
        head's post-softmax attention matrix (the attention-masking
        pathway of the pre-study); it is only valid for B = 1.
        """
        cfg = self.config
        p = self.params
        B, T = ids.shape
        if T < 1 or T > cfg.max_len:
            raise ValueError(f"prefix length {T} outside [1, {cfg.max_len}]")
        if np.any(ids < 0) or np.any(ids >= self.vocab_size):
            raise IndexError("activity id outside vocabulary")
        d, h = cfg.d_k, cfg.h
        scale = 1.0 / np.sqrt(d)

        X0 = p["embed"][ids] + self.pos_enc[:T][None, :, :]
        Q = np.einsum("btd,hde->bhte", X0, p["Wq"])
        K = np.einsum("btd,hde->bhte", X0, p["Wk"])
        Vv = np.einsum("btd,hde->bhte", X0, p["Wv"])
        if self.frozen_attention:
            A = np.full((B, h, T, T), 1.0 / T)
        else:
            S = np.einsum("bhte,bhse->bhts", Q, K) * scale
            S = S - S.max(axis=-1, keepdims=True)
            expS = np.exp(S)
            A = expS / expS.sum(axis=-1, keepdims=True)
        att = A.copy()
        if masked_positions:
            if B != 1:
                raise ValueError("attention masking only supported for a single prefix")
            idx = sorted(masked_positions)
            if idx and (idx[0] < 0 or idx[-1] >= T):
                raise IndexError(f"masked position outside prefix of length {T}")
            A = A.copy()
            A[:, :, idx, :] = 0.0
            A[:, :, :, idx] = 0.0
        H = np.einsum("bhts,bhse->bhte", A, Vv)
        Hc = H.transpose(0, 2, 1, 3).reshape(B, T, d)
        M = Hc @ p["Wo"]
        R1 = X0 + M
        N1, ln1_cache = _layer_norm(R1, p["ln1_g"], p["ln1_b"])
        U = N1 @ p["W1"] + p["b1"]
        Urelu = np.maximum(U, 0.0)
        F = Urelu @ p["W2"] + p["b2"]
        R2 = N1 + F
        N2, ln2_cache = _layer_norm(R2, p["ln2_g"], p["ln2_b"])
        pooled = N2.mean(axis=1)
        logits = pooled @ p["Wout"] + p["bout"]
        logits = logits - logits.max(axis=-1, keepdims=True)
        expl = np.exp(logits)
        probs = expl / expl.sum(axis=-1, keepdims=True)

        cache = None
        if keep_cache:
            cache = dict(ids=ids, X0=X0, Q=Q, K=K, V=Vv, A=A, H=H, Hc=Hc,
                         N1=N1, ln1=ln1_cache, U=U, Urelu=Urelu,
                         N2=N2, ln2=ln2_cache, pooled=pooled, probs=probs)
        return probs, att, cache

    def forward(self, prefix, masked_positions=None):
        """Predict for one prefix (a Prefix or an id sequence).

        Returns ``(probs, attention)`` with ``probs`` over activities +
        END and ``attention`` of shape (h, T, T), post-softmax and taken
        before any attention masking is applied.
        """
        ids = _prefix_ids(prefix)
        probs, att, _ = self._forward_batch(ids[None, :], masked_positions=masked_positions)
        return probs[0], att[0]

    # ------------------------------------------------------------- backward

    def loss_and_grads(self, ids: np.ndarray, targets: np.ndarray):
        """Mean cross-entropy over a same-length (B, T) batch and its
        gradients w.r.t. every parameter."""
        p = self.params
        cfg = self.config
        B, T = ids.shape
        d, h = cfg.d_k, cfg.h
        dh = d // h
        scale = 1.0 / np.sqrt(d)

        probs, _, c = self._forward_batch(ids, keep_cache=True)
        eps = 1e-12
        loss = float(-np.mean(np.log(probs[np.arange(B), targets] + eps)))

        dlogits = probs.copy()
        dlogits[np.arange(B), targets] -= 1.0
        dlogits /= B

        g = {}
        g["Wout"] = c["pooled"].T @ dlogits
        g["bout"] = dlogits.sum(axis=0)
        dpooled = dlogits @ p["Wout"].T
        dN2 = np.repeat(dpooled[:, None, :], T, axis=1) / T
        dR2, g["ln2_g"], g["ln2_b"] = _layer_norm_backward(dN2, c["ln2"], p["ln2_g"])
        dN1 = dR2.copy()
        dF = dR2
        g["W2"] = np.einsum("btf,btd->fd", c["Urelu"], dF)
        g["b2"] = dF.sum(axis=(0, 1))
        dUrelu = dF @ p["W2"].T
        dU = dUrelu * (c["U"] > 0.0)
        g["W1"] = np.einsum("btd,btf->df", c["N1"], dU)
        g["b1"] = dU.sum(axis=(0, 1))
        dN1 += dU @ p["W1"].T
        dR1, g["ln1_g"], g["ln1_b"] = _layer_norm_backward(dN1, c["ln1"], p["ln1_g"])
        dX0 = dR1.copy()
        dM = dR1
        g["Wo"] = np.einsum("btd,bte->de", c["Hc"], dM)
        dHc = dM @ p["Wo"].T
        dH = dHc.reshape(B, T, h, dh).transpose(0, 2, 1, 3)
        A, Vv = c["A"], c["V"]
        dV = np.einsum("bhts,bhte->bhse", A, dH)
        g["Wv"] = np.einsum("btd,bhte->hde", c["X0"], dV)
        dX0 += np.einsum("bhte,hde->btd", dV, p["Wv"])
        if self.frozen_attention:
            g["Wq"] = np.zeros_like(p["Wq"])
            g["Wk"] = np.zeros_like(p["Wk"])
        else:
            dA = np.einsum("bhte,bhse->bhts", dH, Vv)
            dS = A * (dA - np.sum(dA * A, axis=-1, keepdims=True))
            dQ = np.einsum("bhts,bhse->bhte", dS, c["K"]) * scale
            dK = np.einsum("bhts,bhte->bhse", dS, c["Q"]) * scale
            g["Wq"] = np.einsum("btd,bhte->hde", c["X0"], dQ)
            g["Wk"] = np.einsum("btd,bhte->hde", c["X0"], dK)
            dX0 += np.einsum("bhte,hde->btd", dQ, p["Wq"])
            dX0 += np.einsum("bhte,hde->btd", dK, p["Wk"])
        g["embed"] = np.zeros_like(p["embed"])
        np.add.at(g["embed"], ids, dX0)
        return loss, g

    # ------------------------------------------------------------ accessors

    def target_class(self, target_id: int) -> int:
        """Map a prefix target (activity id or END id) to an output class."""
        if target_id == self.end_id:
            return self.num_classes - 1
        if 0 <= target_id < self.num_activities:
            return target_id
        raise IndexError(f"invalid target id {target_id}")

    def predict_label(self, prefix) -> str:
        probs, _ = self.forward(prefix)
        cls = int(np.argmax(probs))
        return "<END>" if cls == self.num_classes - 1 else self.activity_labels[cls]

    # ---------------------------------------------------------- persistence

    def save(self, path) -> None:
        """Write a checkpoint: config + vocabulary as JSON, parameters as
        little-endian float32 arrays."""
        meta = {
            "format_version": 1,
            "config": asdict(self.config),
            "activity_labels": self.activity_labels,
        }
        arrays = {name: arr.astype("<f4") for name, arr in self.params.items()}
        np.savez(path, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
                 **arrays)

    @classmethod
    def load(cls, path) -> "TransformerModel":
        try:
            data = np.load(path)
        except (OSError, ValueError) as e:
            raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
        if "__meta__" not in data:
            raise CheckpointError(f"{path} is not a model checkpoint")
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta.get("format_version") != 1:
            raise CheckpointError(f"unsupported checkpoint version {meta.get('format_version')}")
        config = ModelConfig(**meta["config"])
        params = {name: data[name].astype(float) for name in data.files if name != "__meta__"}
        return cls(config, meta["activity_labels"], params=params)


def _prefix_ids(prefix) -> np.ndarray:
    if isinstance(prefix, Prefix):
        return np.asarray(prefix.activities, dtype=int)
    return np.asarray(list(prefix), dtype=int)


def _layer_norm(x, gamma, beta):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv
    return gamma * xhat + beta, (xhat, inv)


def _layer_norm_backward(dy, cache, gamma):
    xhat, inv = cache
    dgamma = np.sum(dy * xhat, axis=tuple(range(dy.ndim - 1)))
    dbeta = np.sum(dy, axis=tuple(range(dy.ndim - 1)))
    dxhat = dy * gamma
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dgamma, dbeta


# ------------------------------------------------------------------ training


def train(logobj: EventLog, config: ModelConfig) -> TransformerModel:
    """Train on all prefixes (min length 1) of the log; deterministic per
    config seed. Raises DivergenceError on a non-finite loss."""
    prefixes = extract_prefixes(logobj, min_len=1)
    if not prefixes:
        raise TrainingDataError("no prefixes extractable from the log")
    too_long = max(len(p.activities) for p in prefixes)
    if too_long > config.max_len:
        config = replace(config, max_len=too_long)

    init_seed, epoch_seed = np.random.SeedSequence(entropy=config.seed).spawn(2)
    model = TransformerModel(config, logobj.activity_labels, rng=np.random.default_rng(init_seed))
    epoch_rng = np.random.default_rng(epoch_seed)

    targets = np.array([model.target_class(p.target) for p in prefixes])
    id_arrays = [np.asarray(p.activities, dtype=int) for p in prefixes]
    lengths = np.array([len(a) for a in id_arrays])
    frozen = model.frozen_param_names()

    step = 0
    for _epoch in range(config.epochs):
        order = epoch_rng.permutation(len(prefixes))
        # Batches must be same-length to vectorize; bucket the shuffled
        # order by length so composition still varies per epoch.
        batches = []
        for length in np.unique(lengths):
            bucket = order[lengths[order] == length]
            for start in range(0, len(bucket), config.batch_size):
                batches.append(bucket[start:start + config.batch_size])
        # Interleave length buckets; processing lengths in order makes
        # the pooled representation forget shorter prefixes.
        batch_order = epoch_rng.permutation(len(batches))
        for batch in (batches[i] for i in batch_order):
            ids = np.stack([id_arrays[i] for i in batch])
            if config.pad_dropout > 0.0:
                drop = epoch_rng.random(ids.shape) < config.pad_dropout
                ids = np.where(drop, model.pad_id, ids)
            loss, grads = model.loss_and_grads(ids, targets[batch])
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at step {step}", step=step)
            for name, grad in grads.items():
                if name in frozen:
                    continue
                model.params[name] -= config.learning_rate * grad
            step += 1
    for name, arr in model.params.items():
        if not np.all(np.isfinite(arr)):
            raise DivergenceError(f"non-finite values in parameter {name} after training")
    return model


def gradient_check(model: TransformerModel, prefix, n_samples: int = 30, step: float = 1e-4,
                   seed: int = 0) -> float:
    """Max relative error between analytical gradients and central finite
    differences over a random parameter subsample."""
    ids = _prefix_ids(prefix)[None, :]
    target = np.array([model.target_class(prefix.target) if isinstance(prefix, Prefix) else 0])
    _, grads = model.loss_and_grads(ids, target)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, param in model.params.items():
        if name in model.frozen_param_names():
            if np.any(grads[name] != 0.0):
                return np.inf
            continue
        flat = param.reshape(-1)
        k = min(n_samples, flat.size)
        for idx in rng.choice(flat.size, size=k, replace=False):
            orig = flat[idx]
            flat[idx] = orig + step
            lo_p = model.loss_and_grads(ids, target)[0]
            flat[idx] = orig - step
            lo_m = model.loss_and_grads(ids, target)[0]
            flat[idx] = orig
            numeric = (lo_p - lo_m) / (2.0 * step)
            analytic = grads[name].reshape(-1)[idx]
            denom = max(abs(numeric) + abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def weighted_f1(model: TransformerModel, prefixes) -> float:
    """Support-weighted F1 of argmax predictions over prefix targets."""
    y_true, y_pred = [], []
    for p in prefixes:
        probs, _ = model.forward(p)
        y_pred.append(int(np.argmax(probs)))
        y_true.append(model.target_class(p.target))
    y_true = np.array(y_true)
    y_pred = np.array(y_pred)
    total = len(y_true)
    score = 0.0
    for cls in np.unique(y_true):
        support = int(np.sum(y_true == cls))
        tp = int(np.sum((y_true == cls) & (y_pred == cls)))
        fp = int(np.sum((y_true != cls) & (y_pred == cls)))
        fn = support - tp
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        score += support * f1
    return score / total if total else 0.0
