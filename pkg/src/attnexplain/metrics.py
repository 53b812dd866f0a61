"""Rule conversion and the five quantitative explanation metrics:
correctness, completeness, continuity, contrastivity, compactness.

Metric operationalizations: correctness is the per-prefix Pearson
correlation between single-position masking impact (TVD) and the
explainer's binary edge indicator; completeness is micro-averaged F1 of
rule right-hand sides against the model's likely-next sets; continuity
and contrastivity are Jaccard-based on the firing rules' right-hand
sides; compactness counts rules and averages right-hand-side lengths.
Undefined per-prefix values (constant vectors, no dissimilar pairs) are
excluded; a metric with no defined values reports None.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .attnstats import tvd
from .eventlog import EventLog, Prefix, extract_prefixes
from .explain import ExplanationGraph, Thresholds, likely_next, mask_positions


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: frozenset[str]


@dataclass(frozen=True)
class MetricValue:
    mean: float | None
    std: float | None
    n: int
    undefined: int = 0

    def as_dict(self):
        return {"mean": self.mean, "std": self.std, "n": self.n, "undefined": self.undefined}


@dataclass(frozen=True)
class MetricReport:
    correctness: MetricValue
    completeness: MetricValue
    continuity: MetricValue
    contrastivity: MetricValue
    compactness: MetricValue
    num_rules: int
    precision: float
    recall: float
    sample_frac: float
    seed: int

    def as_dict(self):
        return {
            "metrics": {
                "correctness": self.correctness.as_dict(),
                "completeness": self.completeness.as_dict(),
                "continuity": self.continuity.as_dict(),
                "contrastivity": self.contrastivity.as_dict(),
                "compactness": self.compactness.as_dict(),
            },
            "num_rules": self.num_rules,
            "precision": self.precision,
            "recall": self.recall,
            "sample_frac": self.sample_frac,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"

    def to_table(self) -> str:
        def cell(v: MetricValue) -> str:
            if v.mean is None:
                return "N +- N"
            return f"{v.mean:.2f} +- {0.0 if v.std is None else v.std:.2f}"

        rows = [
            ("Correctness", cell(self.correctness)),
            ("Completeness", cell(self.completeness)),
            ("Continuity", cell(self.continuity)),
            ("Contrastivity", cell(self.contrastivity)),
            ("Compactness", cell(self.compactness)),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows) + "\n"


def graph_to_rules(graph: ExplanationGraph) -> set[Rule]:
    """One rule per vertex, right-hand side = direct successors."""
    return {Rule(lhs=v, rhs=frozenset(graph.successors(v))) for v in graph.vertices}


def compactness(rules: set[Rule]) -> tuple[int, float]:
    """(rule count, mean right-hand-side length)."""
    if not rules:
        return 0, 0.0
    return len(rules), sum(len(r.rhs) for r in rules) / len(rules)


def _summary(values, undefined=0) -> MetricValue:
    if not values:
        return MetricValue(mean=None, std=None, n=0, undefined=undefined)
    arr = np.asarray(values, dtype=float)
    return MetricValue(mean=float(arr.mean()), std=float(arr.std()), n=len(values),
                       undefined=undefined)


def _pearson(x, y) -> float | None:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 2 or np.std(x) == 0.0 or np.std(y) == 0.0:
        return None
    return float(np.corrcoef(x, y)[0, 1])


def correctness(model, graph: ExplanationGraph, prefixes) -> MetricValue:
    """Correlation between masking impact and explainer edge indicators."""
    labels = model.activity_labels
    values = []
    undefined = 0
    for prefix in prefixes:
        ids = np.asarray(prefix.activities, dtype=int)
        p_orig, _ = model.forward(ids)
        top = int(np.argmax(p_orig))
        if top >= model.num_activities:
            undefined += 1  # END has no graph representation
            continue
        predicted = labels[top]
        model_imp, expl_imp = [], []
        for pos in range(len(ids)):
            masked = mask_positions(ids, [pos], model.pad_id)
            p_m, _ = model.forward(masked)
            model_imp.append(tvd(p_orig, p_m))
            expl_imp.append(1.0 if (labels[int(ids[pos])], predicted) in graph.edges else 0.0)
        corr = _pearson(model_imp, expl_imp)
        if corr is None:
            undefined += 1
        else:
            values.append(corr)
    return _summary(values, undefined)


def completeness(model, rules: set[Rule], prefixes,
                 thresholds: Thresholds = Thresholds(),
                 average: str = "micro"):
    """(MetricValue for F1, precision, recall) of rule right-hand sides
    against the model's likely-next sets, accumulated per activity."""
    labels = model.activity_labels
    by_lhs = {r.lhs: r.rhs for r in rules}
    tp: dict[str, int] = {}
    fp: dict[str, int] = {}
    fn: dict[str, int] = {}
    n = 0
    for prefix in prefixes:
        ids = np.asarray(prefix.activities, dtype=int)
        non_pad = [int(a) for a in ids if a != model.pad_id]
        if not non_pad:
            continue
        last = labels[non_pad[-1]]
        predicted = by_lhs.get(last, frozenset())
        p_orig, _ = model.forward(ids)
        truth = {labels[a] for a in likely_next(p_orig, thresholds, model.num_activities)}
        for a in predicted & truth:
            tp[a] = tp.get(a, 0) + 1
        for a in predicted - truth:
            fp[a] = fp.get(a, 0) + 1
        for a in truth - predicted:
            fn[a] = fn.get(a, 0) + 1
        n += 1

    def prf(tp_n, fp_n, fn_n):
        prec = tp_n / (tp_n + fp_n) if tp_n + fp_n else 0.0
        rec = tp_n / (tp_n + fn_n) if tp_n + fn_n else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        return prec, rec, f1

    if average == "micro":
        prec, rec, f1 = prf(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    elif average == "macro":
        classes = set(tp) | set(fp) | set(fn)
        if classes:
            per = [prf(tp.get(a, 0), fp.get(a, 0), fn.get(a, 0)) for a in sorted(classes)]
            prec = float(np.mean([x[0] for x in per]))
            rec = float(np.mean([x[1] for x in per]))
            f1 = float(np.mean([x[2] for x in per]))
        else:
            prec = rec = f1 = 0.0
    else:
        raise ValueError(f"unknown averaging {average!r}")
    return MetricValue(mean=f1, std=0.0, n=n), prec, rec


def _firing_rhs(model, explainer, prefix) -> frozenset[str] | None:
    """Right-hand side of the rule firing for the prefix's last non-PAD
    activity, under an explanation computed on that prefix alone."""
    ids = np.asarray(prefix.activities if isinstance(prefix, Prefix) else prefix, dtype=int)
    non_pad = [int(a) for a in ids if a != model.pad_id]
    if not non_pad:
        return None
    last = model.activity_labels[non_pad[-1]]
    graph = explainer(model, [prefix])
    return frozenset(graph.successors(last)) if last in graph.vertices else frozenset()


def _jaccard(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def continuity(model, explainer, prefixes, seed: int = 0) -> MetricValue:
    """Jaccard similarity of firing rules before/after masking one
    random position; length-1 prefixes are skipped."""
    rng = np.random.default_rng(seed)
    values = []
    undefined = 0
    for prefix in prefixes:
        ids = np.asarray(prefix.activities, dtype=int)
        if len(ids) < 2:
            undefined += 1
            continue
        pos = int(rng.integers(len(ids)))
        perturbed = Prefix(
            activities=tuple(mask_positions(ids, [pos], model.pad_id).tolist()),
            target=prefix.target, source_case=prefix.source_case,
        )
        r_orig = _firing_rhs(model, explainer, prefix)
        r_pert = _firing_rhs(model, explainer, perturbed)
        if r_orig is None or r_pert is None:
            undefined += 1
            continue
        values.append(_jaccard(r_orig, r_pert))
    return _summary(values, undefined)


def contrastivity(model, explainer, prefixes, seed: int = 0,
                  max_pairs: int = 1000) -> MetricValue:
    """1 - Jaccard similarity over sampled prefix pairs with different
    last activities."""
    lasts = [int(np.asarray(p.activities)[-1]) for p in prefixes]
    pairs = [
        (i, j)
        for i in range(len(prefixes))
        for j in range(i + 1, len(prefixes))
        if lasts[i] != lasts[j]
    ]
    if not pairs:
        return MetricValue(mean=None, std=None, n=0, undefined=len(prefixes))
    rng = np.random.default_rng(seed)
    if len(pairs) > max_pairs:
        idx = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[i] for i in sorted(idx.tolist())]
    rhs_cache: dict[int, frozenset | None] = {}

    def rhs(i):
        if i not in rhs_cache:
            rhs_cache[i] = _firing_rhs(model, explainer, prefixes[i])
        return rhs_cache[i]

    values = []
    undefined = 0
    for i, j in pairs:
        a, b = rhs(i), rhs(j)
        if a is None or b is None:
            undefined += 1
            continue
        values.append(1.0 - _jaccard(a, b))
    return _summary(values, undefined)


def sample_prefixes(logobj: EventLog, sample_frac: float, seed: int) -> list[Prefix]:
    prefixes = extract_prefixes(logobj, min_len=1)
    if sample_frac >= 1.0:
        return prefixes
    rng = np.random.default_rng(seed)
    k = max(1, int(round(sample_frac * len(prefixes))))
    idx = sorted(rng.choice(len(prefixes), size=k, replace=False).tolist())
    return [prefixes[i] for i in idx]


def evaluate_all(model, explainer, logobj: EventLog, sample_frac: float = 1.0,
                 thresholds: Thresholds = Thresholds(), seed: int = 0) -> MetricReport:
    """Run all five metrics over a seeded prefix sample."""
    prefixes = sample_prefixes(logobj, sample_frac, seed)
    graph = explainer(model, prefixes)
    rules = graph_to_rules(graph)
    corr = correctness(model, graph, prefixes)
    comp_value, precision, recall = completeness(model, rules, prefixes, thresholds)
    cont = continuity(model, explainer, prefixes, seed=seed)
    contr = contrastivity(model, explainer, prefixes, seed=seed)
    n_rules, mean_rhs = compactness(rules)
    comp = MetricValue(mean=mean_rhs, std=0.0, n=n_rules)
    return MetricReport(
        correctness=corr, completeness=comp_value, continuity=cont,
        contrastivity=contr, compactness=comp, num_rules=n_rules,
        precision=precision, recall=recall, sample_frac=sample_frac, seed=seed,
    )
