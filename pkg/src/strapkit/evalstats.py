"""Evaluation statistics: patient aggregation, AUROC, bootstrap CIs, DeLong,
permutation and paired-t tests, Benjamini-Hochberg adjustment, and
integrated-gradients attribution.

Conventions pinned here so comparisons are total functions:
p = 1.0 for genuinely identical degenerate inputs, an error for
zero-variance inputs that nevertheless differ.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats as sps

from .errors import (
    DegenerateVariance,
    InconsistentLabel,
    LengthMismatch,
    MismatchedRows,
    NonConvergent,
    OutOfRangeP,
    SingleClass,
)
from .imagecore import Rng

DEFAULT_BOOTSTRAP_RESAMPLES = 2000
DEFAULT_PERMUTATION_RESAMPLES = 2000
DEFAULT_BH_Q = 0.10
DEFAULT_IG_STEPS = 50


@dataclass(frozen=True)
class ScoreRow:
    tile_id: str
    patient_id: str
    score: float
    label: int


@dataclass(frozen=True)
class ScoreTable:
    rows: tuple  # of ScoreRow

    def __len__(self):
        return len(self.rows)

    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rows])

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.rows])


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str


def load_score_table(path) -> ScoreTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"tile_id", "patient_id", "score", "label"}
        if not required.issubset(reader.fieldnames or []):
            raise MismatchedRows(
                f"{path}: expected columns {sorted(required)}, got {reader.fieldnames}")
        rows = []
        for i, row in enumerate(reader, start=2):
            score = float(row["score"])
            if not np.isfinite(score):
                raise ValueError(f"{path}:{i}: non-finite score")
            label = int(row["label"])
            if label not in (0, 1):
                raise InconsistentLabel(f"{path}:{i}: label {label} not in {{0,1}}")
            rows.append(ScoreRow(row["tile_id"], row["patient_id"], score, label))
    return ScoreTable(tuple(rows))


def save_score_table(table: ScoreTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tile_id", "patient_id", "score", "label"])
        for r in table.rows:
            writer.writerow([r.tile_id, r.patient_id, repr(r.score), r.label])


def aggregate_patient(table: ScoreTable) -> ScoreTable:
    """Mean tile score per patient; output ordered by patient_id."""
    if not table.rows:
        raise MismatchedRows("empty score table")
    by_patient: dict[str, list[ScoreRow]] = {}
    for r in table.rows:
        by_patient.setdefault(r.patient_id, []).append(r)
    out = []
    for pid in sorted(by_patient):
        rows = by_patient[pid]
        labels = {r.label for r in rows}
        if len(labels) > 1:
            raise InconsistentLabel(f"patient {pid} has labels {sorted(labels)}")
        out.append(ScoreRow(pid, pid, float(np.mean([r.score for r in rows])),
                            rows[0].label))
    return ScoreTable(tuple(out))


def _auroc_arrays(scores: np.ndarray, labels: np.ndarray) -> float:
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClass("AUROC needs both classes")
    ranks = sps.rankdata(np.concatenate([pos, neg]))
    return float((ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2)
                 / (len(pos) * len(neg)))


def auroc(table: ScoreTable) -> float:
    """Mann-Whitney AUROC: P(score_pos > score_neg), ties counted half."""
    return _auroc_arrays(table.scores(), table.labels())


def bootstrap_ci(table: ScoreTable, n_resamples: int = DEFAULT_BOOTSTRAP_RESAMPLES,
                 level: float = 0.95, rng: Rng | None = None) -> tuple[float, float]:
    """Percentile bootstrap interval for AUROC over row resampling.

    Resamples that lose a class are redrawn (budget 10*n draws total) so the
    interval is always built from exactly n_resamples valid AUROCs.
    """
    if rng is None:
        rng = Rng(0)
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    scores = table.scores()
    labels = table.labels()
    if (labels == 1).sum() == 0 or (labels == 0).sum() == 0:
        raise SingleClass("bootstrap needs both classes")
    n = len(scores)
    aucs = np.empty(n_resamples)
    draws = 0
    budget = 10 * n_resamples
    for i in range(n_resamples):
        while True:
            if draws >= budget:
                raise NonConvergent(
                    f"redraw budget {budget} exhausted at resample {i}")
            idx = rng.integers(0, n, size=n)
            draws += 1
            lab = labels[idx]
            if lab.min() != lab.max():
                aucs[i] = _auroc_arrays(scores[idx], lab)
                break
    alpha = (1.0 - level) / 2.0
    lo, hi = np.percentile(aucs, [100 * alpha, 100 * (1 - alpha)])
    return float(lo), float(hi)


def _placements(scores: np.ndarray, labels: np.ndarray):
    """DeLong structural components: per-positive and per-negative placements."""
    pos = scores[labels == 1][:, None]
    neg = scores[labels == 0][None, :]
    psi = (pos > neg).astype(np.float64) + 0.5 * (pos == neg)
    return psi.mean(axis=1), 1.0 - psi.mean(axis=0), psi.mean()


def delong_test(table_a: ScoreTable, table_b: ScoreTable) -> TestResult:
    """Paired DeLong comparison of two correlated AUROCs."""
    ids_a = [(r.tile_id, r.patient_id, r.label) for r in table_a.rows]
    ids_b = [(r.tile_id, r.patient_id, r.label) for r in table_b.rows]
    if ids_a != ids_b:
        raise MismatchedRows("tables must share ids and labels row-for-row")
    labels = table_a.labels()
    if (labels == 1).sum() == 0 or (labels == 0).sum() == 0:
        raise SingleClass("DeLong needs both classes")
    v10_a, v01n_a, auc_a = _placements(table_a.scores(), labels)
    v10_b, v01n_b, auc_b = _placements(table_b.scores(), labels)
    # v01n holds P(neg outranks pos); convert back to the AUC orientation
    v01_a, v01_b = 1.0 - v01n_a, 1.0 - v01n_b
    m, n = len(v10_a), len(v01_a)
    s10 = np.cov(np.stack([v10_a, v10_b])) if m > 1 else np.zeros((2, 2))
    s01 = np.cov(np.stack([v01_a, v01_b])) if n > 1 else np.zeros((2, 2))
    var = ((s10[0, 0] + s10[1, 1] - 2 * s10[0, 1]) / m
           + (s01[0, 0] + s01[1, 1] - 2 * s01[0, 1]) / n)
    delta = auc_a - auc_b
    if var < 1e-12:
        if abs(delta) < 1e-12:
            return TestResult(0.0, 1.0, "delong")
        raise DegenerateVariance(
            f"zero variance with differing AUROCs ({auc_a} vs {auc_b})")
    z = delta / np.sqrt(var)
    p = 2.0 * sps.norm.sf(abs(z))
    return TestResult(float(z), float(p), "delong")


def permutation_test(preds_a: Sequence[int], preds_b: Sequence[int],
                     labels: Sequence[int], n: int = DEFAULT_PERMUTATION_RESAMPLES,
                     rng: Rng | None = None) -> TestResult:
    """Two-sided accuracy-difference permutation test (per-case label swap)."""
    a = np.asarray(preds_a)
    b = np.asarray(preds_b)
    y = np.asarray(labels)
    if not (len(a) == len(b) == len(y)):
        raise LengthMismatch(f"lengths {len(a)}, {len(b)}, {len(y)}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = Rng(0)
    correct_a = (a == y).astype(np.float64)
    correct_b = (b == y).astype(np.float64)
    observed = correct_a.mean() - correct_b.mean()
    diffs = correct_a - correct_b
    count = 0
    for _ in range(n):
        signs = np.where(np.asarray(rng.uniform(size=len(diffs))) < 0.5, -1.0, 1.0)
        if abs((diffs * signs).mean()) >= abs(observed) - 1e-15:
            count += 1
    p = (1 + count) / (1 + n)
    return TestResult(float(observed), float(p), "permutation")


def paired_t_test(vals_a: Sequence[float], vals_b: Sequence[float]) -> TestResult:
    a = np.asarray(vals_a, dtype=np.float64)
    b = np.asarray(vals_b, dtype=np.float64)
    if len(a) != len(b):
        raise LengthMismatch(f"lengths {len(a)}, {len(b)}")
    if len(a) < 2:
        raise LengthMismatch("need at least 2 pairs")
    d = a - b
    sd = d.std(ddof=1)
    if sd < 1e-15:
        if abs(d.mean()) < 1e-15:
            return TestResult(0.0, 1.0, "paired_t")
        raise DegenerateVariance("identical nonzero differences")
    t = d.mean() / (sd / np.sqrt(len(d)))
    p = 2.0 * sps.t.sf(abs(t), df=len(d) - 1)
    return TestResult(float(t), float(p), "paired_t")


def bh_adjust(pvals: Sequence[float], q: float = DEFAULT_BH_Q):
    """Benjamini-Hochberg step-up; returns (adjusted, reject at level q)."""
    p = np.asarray(pvals, dtype=np.float64)
    if p.size and ((p < 0).any() or (p > 1).any()):
        raise OutOfRangeP(f"p-values outside [0, 1]: {p}")
    if not 0 < q < 1:
        raise ValueError(f"q {q} outside (0, 1)")
    m = p.size
    if m == 0:
        return [], []
    order = np.argsort(p, kind="stable")
    adj_sorted = p[order] * m / np.arange(1, m + 1)
    adj_sorted = np.minimum.accumulate(adj_sorted[::-1])[::-1]
    adj_sorted = np.minimum(adj_sorted, 1.0)
    adjusted = np.empty(m)
    adjusted[order] = adj_sorted
    return adjusted.tolist(), (adjusted <= q).tolist()


GradOracle = Callable[[np.ndarray], tuple[float, np.ndarray]]


def integrated_gradients(oracle: GradOracle, input_vec: Sequence[float],
                         baseline: Sequence[float],
                         steps: int = DEFAULT_IG_STEPS) -> np.ndarray:
    """Right-Riemann path-integral attribution from baseline to input."""
    x = np.asarray(input_vec, dtype=np.float64)
    x0 = np.asarray(baseline, dtype=np.float64)
    if x.shape != x0.shape:
        raise LengthMismatch(f"input {x.shape} vs baseline {x0.shape}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    diff = x - x0
    total = np.zeros_like(x)
    for k in range(1, steps + 1):
        _, grad = oracle(x0 + (k / steps) * diff)
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != x.shape:
            raise LengthMismatch(f"gradient shape {grad.shape} vs input {x.shape}")
        total += grad
    return diff * total / steps
