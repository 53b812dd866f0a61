"""The two reliability experiments for attention scores.

Experiment 1 trains paired normally-trained and frozen-uniform models
and compares attention distributions (JSD) and predictions (TVD) on the
test prefixes, one (mean JSD, mean TVD) point per pair. Experiment 2
compares, per prefix position, masking the input element against zeroing
the corresponding attention rows/columns, recording the TVD between the
two resulting predictions.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace

import numpy as np

from .attnstats import flatten, jsd, tvd
from .eventlog import EventLog, extract_prefixes, split
from .explain import mask_positions
from .transformer import (
    ATTENTION_FROZEN_UNIFORM,
    ATTENTION_LEARNED,
    ModelConfig,
    TransformerModel,
    train,
)


@dataclass(frozen=True)
class Exp1Point:
    baseline_seed: int
    modified_seed: int
    mean_jsd: float
    mean_tvd: float
    n_samples: int


@dataclass(frozen=True)
class Exp1Result:
    points: tuple[Exp1Point, ...]
    scope: str  # "all_heads" or "per_head"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["baseline_seed", "modified_seed", "mean_jsd", "mean_tvd", "n_samples"])
        for pt in self.points:
            writer.writerow([pt.baseline_seed, pt.modified_seed,
                             f"{pt.mean_jsd:.12g}", f"{pt.mean_tvd:.12g}", pt.n_samples])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "scope": self.scope,
            "points": [
                {"baseline_seed": pt.baseline_seed, "modified_seed": pt.modified_seed,
                 "mean_jsd": pt.mean_jsd, "mean_tvd": pt.mean_tvd, "n_samples": pt.n_samples}
                for pt in self.points
            ],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class Exp2Result:
    tvd_values: tuple[float, ...]        # one per (prefix, position)
    rows: tuple[tuple[int, int, float], ...]  # (prefix index, position, tvd)
    histogram: tuple[int, ...]
    bin_edges: tuple[float, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["prefix_index", "position", "tvd"])
        for idx, pos, value in self.rows:
            writer.writerow([idx, pos, f"{value:.12g}"])
        return buf.getvalue()

    def to_json(self) -> str:
        payload = {
            "histogram": list(self.histogram),
            "bin_edges": list(self.bin_edges),
            "n_values": len(self.tvd_values),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def compare_models(baseline: TransformerModel, modified: TransformerModel,
                   prefixes, scope: str = "all_heads") -> tuple[float, float]:
    """Mean JSD between attention distributions and mean TVD between
    predictions over the given prefixes."""
    jsds, tvds = [], []
    for prefix in prefixes:
        p_b, att_b = baseline.forward(prefix)
        p_m, att_m = modified.forward(prefix)
        heads_b, all_b = flatten(att_b)
        heads_m, all_m = flatten(att_m)
        if scope == "all_heads":
            jsds.append(jsd(all_b, all_m))
        elif scope == "per_head":
            jsds.append(float(np.mean([jsd(hb, hm) for hb, hm in zip(heads_b, heads_m)])))
        else:
            raise ValueError(f"unknown scope {scope!r}")
        tvds.append(tvd(p_b, p_m))
    return float(np.mean(jsds)), float(np.mean(tvds))


def experiment1(logobj: EventLog, repeats: int = 5, config: ModelConfig = ModelConfig(),
                train_frac: float = 0.7, scope: str = "all_heads",
                cross_product: bool = False) -> Exp1Result:
    """Train ``repeats`` baseline / frozen-uniform model pairs and compare
    them on the test prefixes. Pairing is by repeat index unless
    ``cross_product`` is set."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    root = np.random.SeedSequence(entropy=config.seed)
    split_seed, *model_seeds = [int(s) for s in root.generate_state(repeats + 1)]
    train_log, test_log = split(logobj, train_frac, seed=split_seed)
    test_prefixes = extract_prefixes(test_log, min_len=1)

    baselines, modified = [], []
    for seed in model_seeds:
        base_cfg = replace(config, seed=seed, attention_mode=ATTENTION_LEARNED)
        frozen_cfg = replace(config, seed=seed, attention_mode=ATTENTION_FROZEN_UNIFORM)
        baselines.append(train(train_log, base_cfg))
        modified.append(train(train_log, frozen_cfg))

    pairs = (
        [(i, j) for i in range(repeats) for j in range(repeats)]
        if cross_product
        else [(i, i) for i in range(repeats)]
    )
    points = []
    for i, j in pairs:
        mean_jsd, mean_tvd = compare_models(baselines[i], modified[j], test_prefixes, scope)
        points.append(Exp1Point(
            baseline_seed=model_seeds[i], modified_seed=model_seeds[j],
            mean_jsd=mean_jsd, mean_tvd=mean_tvd, n_samples=len(test_prefixes),
        ))
    return Exp1Result(points=tuple(points), scope=scope)


def experiment2(model: TransformerModel, prefixes, n_bins: int = 20) -> Exp2Result:
    """Per prefix and position, TVD between the input-masked and the
    attention-masked prediction."""
    rows = []
    for idx, prefix in enumerate(prefixes):
        ids = np.asarray(prefix.activities if hasattr(prefix, "activities") else prefix,
                         dtype=int)
        for pos in range(len(ids)):
            masked_input = mask_positions(ids, [pos], model.pad_id)
            p_m, _ = model.forward(masked_input)
            p_am, _ = model.forward(ids, masked_positions={pos})
            rows.append((idx, pos, tvd(p_m, p_am)))
    values = [v for _, _, v in rows]
    hist, edges = np.histogram(values, bins=n_bins, range=(0.0, 1.0))
    return Exp2Result(
        tvd_values=tuple(values),
        rows=tuple(rows),
        histogram=tuple(int(x) for x in hist),
        bin_edges=tuple(float(x) for x in edges),
    )
