import numpy as np
import pytest

from attnexplain.eventlog import build_log
from attnexplain.transformer import ModelConfig, TransformerModel, train

TINY_CONFIG = ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8, epochs=5, batch_size=4,
                          learning_rate=1e-2, seed=0)


@pytest.fixture
def abc_log():
    """Three-activity log with a couple of variants."""
    return build_log([
        ("c1", ["A", "B", "C"]),
        ("c2", ["A", "B", "C"]),
        ("c3", ["A", "C"]),
        ("c4", ["B", "C"]),
    ])


@pytest.fixture
def tiny_model(abc_log):
    """Freshly initialized (untrained) small model over the abc log."""
    return TransformerModel(TINY_CONFIG, abc_log.activity_labels)


@pytest.fixture(scope="session")
def trained_chain_model():
    """Model trained to convergence on a deterministic A->B->C->D chain."""
    logobj = build_log([(f"c{i}", ["A", "B", "C", "D"]) for i in range(40)])
    config = ModelConfig(d_k=16, h=2, max_len=8, ff_dim=16, epochs=40,
                         batch_size=8, learning_rate=1e-2, seed=1)
    return train(logobj, config), logobj


def reference_forward(model, ids, masked_positions=None):
    """Independent straight-line re-implementation of the forward pass,
    written with explicit loops where practical. Used as the oracle for
    the vectorized model code."""
    cfg = model.config
    p = model.params
    ids = np.asarray(ids, dtype=int)
    T = len(ids)
    d, h = cfg.d_k, cfg.h
    dh = d // h

    X = np.array([p["embed"][ids[t]] + model.pos_enc[t] for t in range(T)])
    heads = []
    att = np.zeros((h, T, T))
    for k in range(h):
        Q = X @ p["Wq"][k]
        K = X @ p["Wk"][k]
        V = X @ p["Wv"][k]
        if model.frozen_attention:
            A = np.full((T, T), 1.0 / T)
        else:
            S = Q @ K.T / np.sqrt(d)
            A = np.zeros((T, T))
            for t in range(T):
                row = np.exp(S[t] - S[t].max())
                A[t] = row / row.sum()
        att[k] = A
        if masked_positions:
            A = A.copy()
            for pos in masked_positions:
                A[pos, :] = 0.0
                A[:, pos] = 0.0
        heads.append(A @ V)
    Hc = np.concatenate(heads, axis=1)
    R1 = X + Hc @ p["Wo"]

    def layer_norm(x, gamma, beta):
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        return gamma * (x - mu) / np.sqrt(var + 1e-5) + beta

    N1 = layer_norm(R1, p["ln1_g"], p["ln1_b"])
    F = np.maximum(N1 @ p["W1"] + p["b1"], 0.0) @ p["W2"] + p["b2"]
    N2 = layer_norm(N1 + F, p["ln2_g"], p["ln2_b"])
    pooled = N2.mean(axis=0)
    logits = pooled @ p["Wout"] + p["bout"]
    e = np.exp(logits - logits.max())
    return e / e.sum(), att
