import csv
import io
import json

import numpy as np
import pytest

from attnexplain.eventlog import build_log, extract_prefixes
from attnexplain.prestudy import compare_models, experiment1, experiment2
from attnexplain.transformer import (
    ATTENTION_FROZEN_UNIFORM,
    ModelConfig,
    TransformerModel,
)
from conftest import TINY_CONFIG, reference_forward

SMALL_CONFIG = ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8, epochs=2,
                           batch_size=4, learning_rate=1e-2, seed=0)


def test_self_comparison_is_exact_zero(tiny_model):
    prefixes = [np.array([0, 1]), np.array([2, 0, 1])]
    mean_jsd, mean_tvd = compare_models(tiny_model, tiny_model, prefixes)
    assert (mean_jsd, mean_tvd) == (0.0, 0.0)


def test_compare_models_scopes_differ(abc_log, tiny_model):
    frozen = TransformerModel(
        ModelConfig(d_k=8, h=2, max_len=8, ff_dim=8,
                    attention_mode=ATTENTION_FROZEN_UNIFORM),
        abc_log.activity_labels,
    )
    prefixes = [np.array([0, 1, 2])]
    all_heads = compare_models(tiny_model, frozen, prefixes, scope="all_heads")
    per_head = compare_models(tiny_model, frozen, prefixes, scope="per_head")
    assert all_heads[0] > 0.0 and per_head[0] > 0.0
    assert all_heads[1] == per_head[1]  # predictions do not depend on scope
    with pytest.raises(ValueError):
        compare_models(tiny_model, frozen, prefixes, scope="nope")


def test_experiment1_shapes_and_determinism(abc_log):
    r1 = experiment1(abc_log, repeats=2, config=SMALL_CONFIG)
    r2 = experiment1(abc_log, repeats=2, config=SMALL_CONFIG)
    assert r1 == r2
    assert len(r1.points) == 2
    for pt in r1.points:
        assert pt.baseline_seed == pt.modified_seed  # paired by repeat
        assert 0.0 <= pt.mean_jsd <= np.log(2.0) + 1e-12
        assert 0.0 <= pt.mean_tvd <= 1.0
        assert pt.n_samples > 0


def test_experiment1_cross_product(abc_log):
    r = experiment1(abc_log, repeats=2, config=SMALL_CONFIG, cross_product=True)
    assert len(r.points) == 4


def test_experiment1_rejects_bad_repeats(abc_log):
    with pytest.raises(ValueError):
        experiment1(abc_log, repeats=0, config=SMALL_CONFIG)


def test_exp1_serialization(abc_log):
    r = experiment1(abc_log, repeats=2, config=SMALL_CONFIG)
    rows = list(csv.DictReader(io.StringIO(r.to_csv())))
    assert len(rows) == 2
    assert float(rows[0]["mean_jsd"]) == pytest.approx(r.points[0].mean_jsd)
    payload = json.loads(r.to_json())
    assert payload["scope"] == "all_heads"
    assert len(payload["points"]) == 2


def test_experiment2_matches_reference_oracle(tiny_model):
    prefixes = [np.array([0, 1, 2]), np.array([2, 2])]
    result = experiment2(tiny_model, prefixes)
    assert len(result.tvd_values) == 5  # one per (prefix, position)
    for idx, pos, value in result.rows:
        ids = prefixes[idx]
        masked_ids = ids.copy()
        masked_ids[pos] = tiny_model.pad_id
        p_in, _ = reference_forward(tiny_model, masked_ids)
        p_att, _ = reference_forward(tiny_model, ids, masked_positions={pos})
        oracle = 0.5 * np.abs(p_in - p_att).sum()
        assert value == pytest.approx(oracle, abs=1e-6)
        assert 0.0 <= value <= 1.0


def test_experiment2_histogram(tiny_model):
    prefixes = extract_prefixes(
        build_log([("c1", ["A", "B", "C"]), ("c2", ["B", "C"])])
    )
    result = experiment2(tiny_model, prefixes)
    assert len(result.histogram) == 20
    assert len(result.bin_edges) == 21
    assert sum(result.histogram) == len(result.tvd_values)
    payload = json.loads(result.to_json())
    assert payload["n_values"] == len(result.tvd_values)
    rows = list(csv.DictReader(io.StringIO(result.to_csv())))
    assert len(rows) == len(result.tvd_values)
