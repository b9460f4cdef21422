"""End-to-end evaluations: CCA image retrieval, STS, and metric meta-correlation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cca
from .corrstats import cosine_distance_matrix, paired_cosine_distances, pearson, spearman
from .errors import AlignmentError, FormatError, ValidationError
from .repstore import PairedDataset, RepresentationSet, StsGold

DEFAULT_K_VALUES = (1, 5, 10)
DIRECTIONS = ("text-to-image", "image-to-text")
STS_MODES = ("raw", "cca_projected")
_QUERY_BLOCK = 1024


@dataclass(frozen=True)
class RetrievalReport:
    k_values: tuple[int, ...]
    recalls: tuple[float, ...]
    n_queries: int
    n_candidates: int
    cca_k: int | None = None
    epsilon: float | None = None
    direction: str = "text-to-image"
    weighted: bool = True
    model: cca.CcaModel | None = field(default=None, repr=False, compare=False)

    def recall(self, k: int) -> float:
        return self.recalls[self.k_values.index(k)]

    def to_dict(self) -> dict:
        return {
            "k_values": list(self.k_values),
            "recalls": list(self.recalls),
            "n_queries": self.n_queries,
            "n_candidates": self.n_candidates,
            "cca_k": self.cca_k,
            "epsilon": self.epsilon,
            "direction": self.direction,
            "weighted": self.weighted,
            "canonical_correlations": None if self.model is None else [float(c) for c in self.model.correlations],
        }


def gold_ranks(queries, candidates, gold) -> np.ndarray:
    """0-based position of each query's gold candidate.

    Candidates are ordered by ascending cosine distance, ties by ascending index.
    """
    queries = np.asarray(queries, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.int64)
    if gold.shape != (queries.shape[0],):
        raise ValidationError(f"need one gold index per query ({queries.shape[0]}), got shape {gold.shape}")
    m = candidates.shape[0]
    if np.any((gold < 0) | (gold >= m)):
        raise ValidationError(f"gold indices must lie in [0, {m})")
    cand_index = np.arange(m)
    ranks = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], _QUERY_BLOCK):
        stop = min(start + _QUERY_BLOCK, queries.shape[0])
        D = cosine_distance_matrix(queries[start:stop], candidates)
        g = gold[start:stop]
        gd = D[np.arange(stop - start), g][:, None]
        ahead = (D < gd) | ((D == gd) & (cand_index[None, :] < g[:, None]))
        ranks[start:stop] = ahead.sum(axis=1)
    return ranks


def recall_at_k(queries, candidates, gold, k_values: Sequence[int] = DEFAULT_K_VALUES) -> RetrievalReport:
    """Percentage of queries whose gold candidate is among the ``k`` nearest by cosine distance."""
    queries = np.asarray(queries, dtype=np.float64)
    candidates = np.asarray(candidates, dtype=np.float64)
    if queries.ndim != 2 or candidates.ndim != 2 or queries.shape[1] != candidates.shape[1]:
        raise ValidationError(f"queries {queries.shape} and candidates {candidates.shape} must share a dimension")
    k_values = tuple(int(k) for k in k_values)
    m = candidates.shape[0]
    for k in k_values:
        if not 1 <= k <= m:
            raise ValidationError(f"cutoff k={k} outside [1, {m}] candidates")
    ranks = gold_ranks(queries, candidates, gold)
    n = ranks.size
    recalls = tuple(100.0 * int(np.count_nonzero(ranks < k)) / n for k in k_values)
    return RetrievalReport(k_values, recalls, n, m)


def image_retrieval_eval(train: PairedDataset, test: PairedDataset, epsilon: float = cca.DEFAULT_EPSILON,
                         cca_k: int | None = None, k_values: Sequence[int] = DEFAULT_K_VALUES,
                         direction: str = "text-to-image", weighted: bool = True) -> RetrievalReport:
    """Fit CCA on ``train`` only, then rank ``test`` pairs in the canonical space.

    With ``weighted`` each canonical component is scaled by its correlation
    before cosine ranking.  The fitted model is attached to the report.
    """
    if direction not in DIRECTIONS:
        raise ValidationError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    if train.left.dim != test.left.dim or train.right.dim != test.right.dim:
        raise ValidationError("train and test dimensions disagree")
    model = cca.fit(train, epsilon, cca_k)
    text = cca.project_left(model, test.left.vectors)
    image = cca.project_right(model, test.right.vectors)
    if weighted:
        text = text * model.correlations
        image = image * model.correlations
    queries, candidates = (text, image) if direction == "text-to-image" else (image, text)
    report = recall_at_k(queries, candidates, np.arange(test.n), k_values)
    return RetrievalReport(report.k_values, report.recalls, report.n_queries, report.n_candidates,
                           model.k, model.epsilon, direction, weighted, model)


@dataclass(frozen=True)
class StsReport:
    spearman: float
    n_pairs: int
    mode: str

    def to_dict(self) -> dict:
        return {"spearman": self.spearman, "n_pairs": self.n_pairs, "mode": self.mode}


def sts_eval(reps: RepresentationSet, gold: StsGold, mode: str = "raw",
             model: cca.CcaModel | None = None) -> StsReport:
    """Spearman correlation between negated cosine distance and gold similarity."""
    if mode not in STS_MODES:
        raise ValidationError(f"mode must be one of {STS_MODES}, got {mode!r}")
    index = reps.index()
    for r in gold.records:
        for i in (r.id_a, r.id_b):
            if i not in index:
                raise AlignmentError(f"STS id {i!r} missing from {reps.name}")
    a = reps.vectors[[index[r.id_a] for r in gold.records]]
    b = reps.vectors[[index[r.id_b] for r in gold.records]]
    if mode == "cca_projected":
        if model is None:
            raise ValidationError("cca_projected mode requires a CCA model")
        if model.dim_left != reps.dim:
            raise ValidationError(f"model expects {model.dim_left}-dim vectors, representations are {reps.dim}-dim")
        a, b = cca.project_left(model, a), cca.project_left(model, b)
    similarity = -paired_cosine_distances(a, b)
    return StsReport(spearman(similarity, gold.scores), len(gold.records), mode)


# ---------------------------------------------------------------- metrics

_ABSENT = {"", "-", "--", "---", "na", "n/a", "nan", "none"}


@dataclass(frozen=True)
class MetricsTable:
    """Rows of per-model task metrics; ``None`` marks an absent value."""

    columns: tuple[str, ...]
    rows: tuple[dict, ...]

    def column(self, name: str) -> list:
        if name not in self.columns:
            raise ValidationError(f"unknown column {name!r}; table has {list(self.columns)}")
        return [row.get(name) for row in self.rows]


def _cell(text: str):
    text = text.strip()
    if text.lower() in _ABSENT:
        return None
    try:
        value = float(text)
    except ValueError:
        return text
    return value if math.isfinite(value) else None


def load_metrics_table(path) -> MetricsTable:
    path = Path(path)
    lines = [ln.rstrip("\r\n") for ln in path.read_text(encoding="utf-8").splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty metrics table")
    columns = tuple(c.strip() for c in lines[0].split("\t"))
    if len(set(columns)) != len(columns):
        raise FormatError(f"{path}: duplicate column names")
    rows = []
    for lineno, line in enumerate(lines[1:], 2):
        cells = line.split("\t")
        if len(cells) > len(columns):
            raise FormatError(f"{path}:{lineno}: {len(cells)} cells for {len(columns)} columns")
        cells += [""] * (len(columns) - len(cells))
        rows.append({c: _cell(v) for c, v in zip(columns, cells)})
    return MetricsTable(columns, tuple(rows))


@dataclass(frozen=True)
class CorrelationReport:
    entries: tuple[dict, ...]
    scatter: tuple[dict, ...]

    def value(self, x: str, y: str, group: str = "all") -> float:
        for e in self.entries:
            if e["group"] == group and e["x"] == x and e["y"] == y:
                return e["pearson"]
        raise KeyError((group, x, y))

    def to_dict(self) -> dict:
        nested: dict[str, dict[str, float]] = {}
        for e in self.entries:
            nested.setdefault(e["group"], {})[e["key"]] = e["pearson"]
        return {"correlations": nested, "entries": [dict(e) for e in self.entries]}

    def entries_tsv(self) -> str:
        lines = ["group\tpair\tpearson\tn"]
        lines += [f"{e['group']}\t{e['key']}\t{e['pearson']!r}\t{e['n']}" for e in self.entries]
        return "\n".join(lines) + "\n"

    def scatter_tsv(self) -> str:
        lines = ["x\ty\tlabel\tseries"]
        lines += [f"{s['x']!r}\t{s['y']!r}\t{s['label']}\t{s['series']}" for s in self.scatter]
        return "\n".join(lines) + "\n"


def metric_correlation_report(table: MetricsTable, pairs: Sequence[tuple[str, str]],
                              group_by: str | None = None, label_column: str = "model_name") -> CorrelationReport:
    """Pearson correlation for each requested column pair, optionally per group.

    Rows where either value is absent are skipped; each (group, pair) needs at
    least 2 complete rows.
    """
    if not pairs:
        raise ValidationError("no column pairs requested")
    for x, y in pairs:
        table.column(x), table.column(y)
    if group_by is None:
        groups = {"all": list(table.rows)}
    else:
        table.column(group_by)
        groups = {}
        for row in table.rows:
            tag = row.get(group_by)
            if tag is not None:
                groups.setdefault(str(tag), []).append(row)
    has_labels = label_column in table.columns

    entries, scatter = [], []
    for group, rows in groups.items():
        for x, y in pairs:
            key = f"{x}~{y}"
            usable = [r for r in rows if isinstance(r.get(x), float) and isinstance(r.get(y), float)]
            if len(usable) < 2:
                raise ValidationError(f"pair {key} in group {group!r} has {len(usable)} complete rows; need >= 2")
            xs = [r[x] for r in usable]
            ys = [r[y] for r in usable]
            entries.append({"group": group, "x": x, "y": y, "key": key, "pearson": pearson(xs, ys), "n": len(usable)})
            for k, r in enumerate(usable):
                label = str(r[label_column]) if has_labels and r.get(label_column) is not None else str(k)
                scatter.append({"x": r[x], "y": r[y], "label": label, "series": f"{group}:{key}"})
    return CorrelationReport(tuple(entries), tuple(scatter))
