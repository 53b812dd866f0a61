"""The two global explainers.

Backward Explainer: per prefix, relevant activities (by aggregated
attention over random PAD-maskings) and likely next activities (by
prediction threshold) form a complete bipartite local graph; local
graphs are merged in order with shortcut pruning through the prefix's
last activity.

Attention Exploration Explainer: per prefix, signed relevance scores are
accumulated over "masking out a few" / "masking out most" subsets of the
relevant positions into activity-by-activity score matrices, which are
summed over prefixes, row-normalized, thresholded, and OR-combined into
an adjacency matrix (edge direction: column activity -> row activity).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .attnstats import (
    activity_score_sums,
    aggregate_event_scores,
    cosine_distance,
    max_normalize,
)
from .errors import DegenerateInputError


@dataclass(frozen=True)
class Thresholds:
    """Filtering thresholds for both explainers. ``delta_edge = None``
    means 1 / |A|, i.e. the uniform row value."""

    delta_sim: float = 0.2
    delta_attr: float = 0.5
    delta_pred: float = 0.1
    delta_edge: float | None = None
    sim_eps: float = 0.02

    def edge_threshold(self, num_activities: int) -> float:
        if self.delta_edge is not None:
            return self.delta_edge
        return 1.0 / num_activities


@dataclass(frozen=True)
class ExplanationGraph:
    """Directed activity graph over label strings."""

    vertices: frozenset[str]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        for u, v in self.edges:
            if u not in self.vertices or v not in self.vertices:
                raise ValueError(f"edge ({u}, {v}) has endpoint outside vertex set")

    @staticmethod
    def make(vertices, edges) -> "ExplanationGraph":
        return ExplanationGraph(frozenset(vertices), frozenset(tuple(e) for e in edges))

    def successors(self, vertex: str) -> set[str]:
        return {v for u, v in self.edges if u == vertex}


EMPTY_GRAPH = ExplanationGraph(frozenset(), frozenset())


# --------------------------------------------------------- shared machinery


def _forward(model, ids):
    probs, att = model.forward(ids)
    return np.asarray(probs), np.asarray(att)


def _psi(model, ids) -> dict[int, float]:
    """Max-normalized per-activity attention scores for an id sequence."""
    _, att = _forward(model, ids)
    eta = aggregate_event_scores(att)
    return max_normalize(activity_score_sums(eta, ids, model.pad_id))


def random_maskings(length: int, n_mods: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """``n_mods`` random position subsets, each non-empty and of size at
    most ceil(length / 2)."""
    cap = max(1, int(np.ceil(length / 2)))
    out = []
    for _ in range(n_mods):
        size = int(rng.integers(1, cap + 1))
        out.append(tuple(sorted(rng.choice(length, size=size, replace=False).tolist())))
    return out


def mask_positions(ids, positions, pad_id: int) -> np.ndarray:
    masked = np.asarray(ids, dtype=int).copy()
    masked[list(positions)] = pad_id
    return masked


def relevant_activities(model, prefix, thresholds: Thresholds, n_mods: int = 20,
                        seed: int = 0):
    """Relevant activity ids for a prefix, plus the aggregated score map.

    Attention of the unmodified prefix always contributes; a random
    modification contributes only when its prediction stays within
    ``delta_sim`` cosine distance of the original.
    """
    ids = np.asarray(prefix.activities if hasattr(prefix, "activities") else prefix, dtype=int)
    p_orig, att_orig = _forward(model, ids)
    sums = activity_score_sums(aggregate_event_scores(att_orig), ids, model.pad_id)
    rng = np.random.default_rng(seed)
    for positions in random_maskings(len(ids), n_mods, rng):
        masked = mask_positions(ids, positions, model.pad_id)
        if np.all(masked == model.pad_id):
            continue
        p_mod, att_mod = _forward(model, masked)
        if cosine_distance(p_mod, p_orig) > thresholds.delta_sim:
            continue
        for aid, value in activity_score_sums(
            aggregate_event_scores(att_mod), masked, model.pad_id
        ).items():
            sums[aid] = sums.get(aid, 0.0) + value
    psi = max_normalize(sums)
    a_r = {aid for aid, value in psi.items() if value > thresholds.delta_attr}
    return a_r, psi


def likely_next(probs, thresholds: Thresholds, num_activities: int) -> set[int]:
    """Activity ids with prediction probability strictly above
    ``delta_pred``; the END class is excluded."""
    probs = np.asarray(probs, dtype=float)
    return {aid for aid in range(num_activities) if probs[aid] > thresholds.delta_pred}


# ---------------------------------------------------------- Backward Explainer


def bipartite_local_graph(relevant: set[str], predicted: set[str]) -> ExplanationGraph:
    """Complete bipartite graph from relevant to predicted activities;
    self-edges allowed. Empty if either side is empty."""
    if not relevant or not predicted:
        return EMPTY_GRAPH
    return ExplanationGraph.make(
        relevant | predicted, {(u, v) for u in relevant for v in predicted}
    )


def merge_with_pruning(graph: ExplanationGraph, local: ExplanationGraph,
                       last_activity: str) -> ExplanationGraph:
    """Union the local graph into the global one, then remove shortcut
    edges (u, v) for which (u, last) and (last, v) both exist. Edges
    incident to the last activity are never pruned (they would witness
    their own removal)."""
    vertices = graph.vertices | local.vertices
    edges = set(graph.edges | local.edges)
    a_n = last_activity
    shortcuts = {
        (u, v)
        for (u, v) in edges
        if u != a_n and v != a_n and (u, a_n) in edges and (a_n, v) in edges
    }
    return ExplanationGraph.make(vertices, edges - shortcuts)


def backward_local_graph(model, prefix, thresholds: Thresholds, n_mods: int = 20,
                         seed: int = 0) -> ExplanationGraph:
    a_r, _ = relevant_activities(model, prefix, thresholds, n_mods=n_mods, seed=seed)
    probs, _ = _forward(model, prefix.activities if hasattr(prefix, "activities") else prefix)
    p_r = likely_next(probs, thresholds, model.num_activities)
    labels = model.activity_labels
    return bipartite_local_graph({labels[a] for a in a_r}, {labels[a] for a in p_r})


def backward_explain(model, prefixes, thresholds: Thresholds = Thresholds(),
                     n_mods: int = 20, seed: int = 0,
                     prune: bool = True) -> ExplanationGraph:
    """Fold per-prefix local graphs into one global graph, pruning
    shortcuts through each prefix's last activity after its merge."""
    seeds = np.random.SeedSequence(entropy=seed).generate_state(max(len(prefixes), 1))
    graph = EMPTY_GRAPH
    labels = model.activity_labels
    for prefix, sub_seed in zip(prefixes, seeds):
        local = backward_local_graph(model, prefix, thresholds, n_mods=n_mods,
                                     seed=int(sub_seed))
        ids = prefix.activities if hasattr(prefix, "activities") else list(prefix)
        non_pad = [a for a in ids if a != model.pad_id]
        if not non_pad:
            continue
        last = labels[non_pad[-1]]
        if prune:
            graph = merge_with_pruning(graph, local, last)
        else:
            graph = ExplanationGraph.make(graph.vertices | local.vertices,
                                          graph.edges | local.edges)
    return graph


# ------------------------------------------------- Attention Exploration


def compute_relevance_score(ids, masked_ids, psi_orig: dict[int, float],
                            psi_masked: dict[int, float], p_orig, p_masked,
                            p_r: set[int], sim_eps: float, num_activities: int,
                            literal_cell_index: bool = False) -> np.ndarray:
    """Signed relevance scores for one (prefix, masked prefix) pair.

    Rows index the predicted activity, columns the influencing activity.
    For each masked position, the score is prediction times original
    attention, negated when the prediction for the predicted activity is
    unchanged (within ``sim_eps``). For each non-masked position, the
    score is masked attention times prediction when unchanged, otherwise
    the product of the attention and prediction deltas.

    ``literal_cell_index`` accumulates non-masked scores into the column
    of the most recent masked activity instead of the non-masked
    activity's own column; it mirrors an alternative reading of the
    procedure and is not the default.
    """
    ids = np.asarray(ids, dtype=int)
    masked_ids = np.asarray(masked_ids, dtype=int)
    p_orig = np.asarray(p_orig, dtype=float)
    p_masked = np.asarray(p_masked, dtype=float)
    K = np.zeros((num_activities, num_activities))
    masked_at = masked_ids != ids
    for a in p_r:
        similar = abs(p_orig[a] - p_masked[a]) <= sim_eps
        last_masked = None
        for pos in range(len(ids)):
            if masked_at[pos]:
                a_m = int(ids[pos])
                last_masked = a_m
                s = p_orig[a] * psi_orig.get(a_m, 0.0)
                if similar:
                    s = -s
                K[a, a_m] += s
        for pos in range(len(ids)):
            if masked_at[pos]:
                continue
            a_n = int(masked_ids[pos])
            if a_n >= num_activities:
                continue
            if similar:
                s = psi_masked.get(a_n, 0.0) * p_orig[a]
            else:
                s = abs(psi_orig.get(a_n, 0.0) - psi_masked.get(a_n, 0.0)) * abs(
                    p_orig[a] - p_masked[a]
                )
            col = last_masked if literal_cell_index else a_n
            if col is None:
                continue
            K[a, col] += s
    return K


def _subsets(positions: tuple[int, ...], cap: int, rng: np.random.Generator):
    """All subsets when small enough, else ``cap`` distinct sampled ones."""
    n = len(positions)
    if n <= 8:
        for mask in range(1 << n):
            yield tuple(positions[i] for i in range(n) if mask >> i & 1)
        return
    seen = set()
    attempts = 0
    while len(seen) < cap and attempts < cap * 20:
        attempts += 1
        bits = rng.random(n) < 0.5
        subset = tuple(positions[i] for i in range(n) if bits[i])
        if subset not in seen:
            seen.add(subset)
            yield subset


def score_matrices_for_prefix(model, prefix, thresholds: Thresholds,
                              subset_cap: int = 256, seed: int = 0, n_mods: int = 20,
                              literal_cell_index: bool = False):
    """The per-prefix few/most scenario score matrices K_few, K_most."""
    ids = np.asarray(prefix.activities if hasattr(prefix, "activities") else prefix, dtype=int)
    nA = model.num_activities
    rng = np.random.default_rng(seed)
    a_r, _ = relevant_activities(model, prefix, thresholds, n_mods=n_mods, seed=seed)
    positions = tuple(i for i, aid in enumerate(ids) if int(aid) in a_r)
    p_orig, att_orig = _forward(model, ids)
    psi_orig = max_normalize(activity_score_sums(aggregate_event_scores(att_orig),
                                                 ids, model.pad_id))
    p_r = likely_next(p_orig, thresholds, nA)
    K_few = np.zeros((nA, nA))
    K_most = np.zeros((nA, nA))
    all_positions = set(range(len(ids)))

    def accumulate(target, mask_set):
        if not mask_set:
            return
        masked = mask_positions(ids, mask_set, model.pad_id)
        p_m, att_m = _forward(model, masked)
        try:
            psi_m = max_normalize(activity_score_sums(aggregate_event_scores(att_m),
                                                      masked, model.pad_id))
        except DegenerateInputError:
            psi_m = {}  # fully masked variant: only masked-activity scores apply
        target += compute_relevance_score(
            ids, masked, psi_orig, psi_m, p_orig, p_m, p_r,
            thresholds.sim_eps, nA, literal_cell_index=literal_cell_index,
        )

    for subset in _subsets(positions, subset_cap, rng):
        subset_set = set(subset)
        if subset_set:  # few scenario: mask the relevant positions chosen
            accumulate(K_few, subset_set)
        if subset_set != set(positions):  # most scenario: mask the rest
            accumulate(K_most, all_positions - subset_set)
    return K_few, K_most


def row_normalize(matrix: np.ndarray) -> np.ndarray:
    """Rows rescaled to sum to 1, taken over score magnitudes.

    The sign of a relevance score only records whether masking changed
    the prediction; the magnitude carries how strongly the activity was
    weighted, which is what the edge decision needs. All-zero rows stay
    zero."""
    out = np.abs(np.array(matrix, dtype=float))
    for i, row in enumerate(out):
        total = row.sum()
        out[i] = row / total if total > 0.0 else 0.0
    return out


def attention_exploration_explain(model, prefixes, thresholds: Thresholds = Thresholds(),
                                  subset_cap: int = 256, seed: int = 0, n_mods: int = 20,
                                  literal_cell_index: bool = False) -> ExplanationGraph:
    """Aggregate score matrices across prefixes and read the thresholded,
    OR-combined result as an adjacency matrix."""
    nA = model.num_activities
    K_few = np.zeros((nA, nA))
    K_most = np.zeros((nA, nA))
    seeds = np.random.SeedSequence(entropy=seed).generate_state(max(len(prefixes), 1))
    for prefix, sub_seed in zip(prefixes, seeds):
        kf, km = score_matrices_for_prefix(
            model, prefix, thresholds, subset_cap=subset_cap, seed=int(sub_seed),
            n_mods=n_mods, literal_cell_index=literal_cell_index,
        )
        K_few += kf
        K_most += km
    delta = thresholds.edge_threshold(nA)
    combined = (row_normalize(K_few) > delta) | (row_normalize(K_most) > delta)
    labels = model.activity_labels
    edges = {
        (labels[col], labels[row])
        for row in range(nA)
        for col in range(nA)
        if combined[row, col]
    }
    return ExplanationGraph.make(set(labels), edges)


# ------------------------------------------------------------------- export


def _dot_quote(label: str) -> str:
    return '"' + re.sub(r'(["\\])', r"\\\1", label) + '"'


def to_dot(graph: ExplanationGraph) -> str:
    lines = ["digraph explanation {"]
    for v in sorted(graph.vertices):
        lines.append(f"  {_dot_quote(v)};")
    for u, v in sorted(graph.edges):
        lines.append(f"  {_dot_quote(u)} -> {_dot_quote(v)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_json(graph: ExplanationGraph) -> str:
    payload = {
        "vertices": sorted(graph.vertices),
        "edges": [list(e) for e in sorted(graph.edges)],
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def from_json(text: str) -> ExplanationGraph:
    payload = json.loads(text)
    return ExplanationGraph.make(payload["vertices"], [tuple(e) for e in payload["edges"]])


def export_graph(graph: ExplanationGraph, fmt: str) -> str:
    if fmt == "dot":
        return to_dot(graph)
    if fmt == "json":
        return to_json(graph)
    raise ValueError(f"unknown graph format {fmt!r}")
