import numpy as np
import pytest

from attnexplain.errors import DivergenceError, TrainingDataError
from attnexplain.eventlog import build_log, extract_prefixes
from attnexplain.transformer import (
    ATTENTION_FROZEN_UNIFORM,
    ModelConfig,
    TransformerModel,
    gradient_check,
    sinusoidal_positions,
    train,
    weighted_f1,
)
from conftest import TINY_CONFIG, reference_forward


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(d_k=10, h=4)
    with pytest.raises(ValueError):
        ModelConfig(h=0)
    with pytest.raises(ValueError):
        ModelConfig(attention_mode="nope")


def test_sinusoidal_positions_values():
    enc = sinusoidal_positions(4, 6)
    assert enc.shape == (4, 6)
    assert enc[0, 0] == 0.0 and enc[0, 1] == 1.0
    assert enc[2, 0] == pytest.approx(np.sin(2.0))
    assert enc[1, 3] == pytest.approx(np.cos(1.0 / 10000.0 ** (2.0 / 6.0)))


def test_forward_matches_reference(tiny_model):
    rng = np.random.default_rng(0)
    for _ in range(10):
        T = int(rng.integers(1, 7))
        ids = rng.integers(0, tiny_model.vocab_size, size=T)
        probs, att = tiny_model.forward(ids)
        ref_probs, ref_att = reference_forward(tiny_model, ids)
        np.testing.assert_allclose(probs, ref_probs, atol=1e-9)
        np.testing.assert_allclose(att, ref_att, atol=1e-9)


def test_attention_masked_forward_matches_reference(tiny_model):
    ids = np.array([0, 1, 2, 0])
    for masked in ({0}, {1, 3}, {2}):
        probs, att = tiny_model.forward(ids, masked_positions=masked)
        ref_probs, ref_att = reference_forward(tiny_model, ids, masked_positions=masked)
        np.testing.assert_allclose(probs, ref_probs, atol=1e-9)
        # the captured attention is always the unmasked one
        np.testing.assert_allclose(att, ref_att, atol=1e-9)


def test_attention_rows_sum_to_one(tiny_model):
    _, att = tiny_model.forward(np.array([0, 1, 2]))
    np.testing.assert_allclose(att.sum(axis=-1), 1.0, atol=1e-12)


def test_probs_are_distribution(tiny_model):
    probs, _ = tiny_model.forward(np.array([1, 2]))
    assert probs.shape == (tiny_model.num_classes,)
    assert np.all(probs >= 0.0)
    assert probs.sum() == pytest.approx(1.0)


def test_forward_rejects_bad_input(tiny_model):
    with pytest.raises(ValueError):
        tiny_model.forward(np.arange(TINY_CONFIG.max_len + 1) % 3)
    with pytest.raises(IndexError):
        tiny_model.forward(np.array([99]))
    with pytest.raises(IndexError):
        tiny_model.forward(np.array([0, 1]), masked_positions={5})


def test_gradient_check_small(tiny_model):
    prefixes = [np.array([0, 1, 2])]
    err = gradient_check(tiny_model, prefixes[0], n_samples=20, seed=0)
    assert err < 1e-4


def test_gradient_check_frozen(abc_log):
    cfg = ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8,
                      attention_mode=ATTENTION_FROZEN_UNIFORM)
    model = TransformerModel(cfg, abc_log.activity_labels)
    err = gradient_check(model, np.array([0, 1, 2]), n_samples=20, seed=0)
    assert np.isfinite(err) and err < 1e-4


def test_frozen_uniform_attention_exact(abc_log):
    cfg = ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8,
                      attention_mode=ATTENTION_FROZEN_UNIFORM)
    model = TransformerModel(cfg, abc_log.activity_labels)
    for T in (1, 2, 5):
        _, att = model.forward(np.arange(T) % 3)
        assert np.all(att == 1.0 / T)


def test_target_class_mapping(tiny_model):
    assert tiny_model.target_class(0) == 0
    assert tiny_model.target_class(tiny_model.end_id) == tiny_model.num_classes - 1
    with pytest.raises(IndexError):
        tiny_model.target_class(tiny_model.pad_id)


def test_train_deterministic(abc_log):
    m1 = train(abc_log, TINY_CONFIG)
    m2 = train(abc_log, TINY_CONFIG)
    for name in m1.params:
        np.testing.assert_array_equal(m1.params[name], m2.params[name])


def test_train_seed_changes_weights(abc_log):
    m1 = train(abc_log, TINY_CONFIG)
    from dataclasses import replace
    m2 = train(abc_log, replace(TINY_CONFIG, seed=9))
    assert any(not np.array_equal(m1.params[n], m2.params[n]) for n in m1.params)


def test_train_learns_chain(trained_chain_model):
    model, logobj = trained_chain_model
    assert model.predict_label([logobj.id_of("A")]) == "B"
    assert model.predict_label([logobj.id_of("A"), logobj.id_of("B")]) == "C"
    prefixes = extract_prefixes(logobj)
    assert weighted_f1(model, prefixes) == pytest.approx(1.0, abs=0.01)


def test_train_bumps_max_len(abc_log):
    cfg = ModelConfig(d_k=8, h=2, max_len=2, ff_dim=8, epochs=1)
    model = train(abc_log, cfg)
    assert model.config.max_len >= 3


def test_train_divergence_detected(abc_log):
    cfg = ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8, epochs=30, learning_rate=1e6)
    with pytest.raises(DivergenceError):
        train(abc_log, cfg)


def test_frozen_training_never_touches_qk(abc_log):
    cfg = ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8, epochs=3,
                      attention_mode=ATTENTION_FROZEN_UNIFORM)
    model = train(abc_log, cfg)
    assert np.all(model.params["Wq"] == 0.0)
    assert np.all(model.params["Wk"] == 0.0)


def test_save_load_round_trip(tmp_path, abc_log):
    model = train(abc_log, TINY_CONFIG)
    path = tmp_path / "model.npz"
    model.save(path)
    loaded = TransformerModel.load(path)
    assert loaded.config == model.config
    assert loaded.activity_labels == model.activity_labels
    ids = np.array([0, 1, 2])
    p1, a1 = model.forward(ids)
    p2, a2 = loaded.forward(ids)
    # float32 storage bounds the round-trip error
    np.testing.assert_allclose(p1, p2, atol=1e-4)
    np.testing.assert_allclose(a1, a2, atol=1e-4)


def test_load_rejects_non_checkpoint(tmp_path):
    from attnexplain.errors import CheckpointError
    path = tmp_path / "junk.npz"
    np.savez(path, x=np.arange(3))
    with pytest.raises(CheckpointError):
        TransformerModel.load(path)


def test_load_rejects_shape_mismatch(tmp_path, abc_log):
    from attnexplain.errors import CheckpointError
    model = TransformerModel(TINY_CONFIG, abc_log.activity_labels)
    model.save(tmp_path / "model.npz")
    data = dict(np.load(tmp_path / "model.npz"))
    data["Wo"] = data["Wo"][:-1]
    np.savez(tmp_path / "bad.npz", **data)
    with pytest.raises(CheckpointError):
        TransformerModel.load(tmp_path / "bad.npz")


def test_weighted_f1_perfect_and_degenerate(trained_chain_model):
    model, logobj = trained_chain_model
    prefixes = extract_prefixes(logobj)
    assert weighted_f1(model, prefixes) == pytest.approx(1.0, abs=0.01)
    assert weighted_f1(model, []) == 0.0
