"""Nested cross-validation, fold construction, metrics, and corpus statistics.

Fold plans are built once (speaker-independent plans never split a speaker
across folds, at either level) and the nested loop selects (C, gamma) on inner
folds only, so outer-test predictions can never influence a decision.  The
bookkeeping that proves that is stored on the report.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.special import betainc, gammaincc

from .errors import EvaluationError
from .svm import SMO_TOL, decision_scores, predict, train_multiclass

SPEAKER_INDEPENDENT = "speaker_independent"
SPEAKER_DEPENDENT = "speaker_dependent"
MODES = (SPEAKER_INDEPENDENT, SPEAKER_DEPENDENT)

C_VALUES = tuple(10.0 ** e for e in range(-3, 5))
GAMMA_VALUES = tuple(10.0 ** e for e in range(-6, 4))
DEFAULT_POSITIVE_LABEL = "dissatisfied"
GENDERS = ("m", "f", "unknown")


@dataclass(frozen=True)
class Sample:
    source_id: str
    speaker_id: str
    label: str
    gender: str = "unknown"
    duration_s: float = 0.0

    def __post_init__(self):
        if not self.label:
            raise ValueError("sample %r has an empty label" % (self.source_id,))
        if self.gender not in GENDERS:
            raise ValueError("gender must be one of %s, got %r" % (GENDERS, self.gender))


@dataclass(frozen=True)
class Grid:
    """Hyperparameter grid, powers of ten: 8 C values x 10 gamma values."""

    c_values: tuple = C_VALUES
    gamma_values: tuple = GAMMA_VALUES

    def __post_init__(self):
        if not self.c_values or not self.gamma_values:
            raise ValueError("grid axes must be non-empty")
        if any(v <= 0 for v in self.c_values) or any(v <= 0 for v in self.gamma_values):
            raise ValueError("grid values must be positive")

    def cells(self):
        """All (C, gamma) pairs, C-major ascending — the tie-break order."""
        return [(c, g) for c in self.c_values for g in self.gamma_values]


@dataclass(frozen=True)
class FoldPlan:
    """Outer assignment per sample plus, per outer fold, an inner assignment
    over that fold's training samples (-1 marks samples outside it)."""

    mode: str
    k_outer: int
    k_inner: int
    source_ids: tuple
    outer: tuple
    inner: tuple
    seed: int


class Metrics(NamedTuple):
    uar: float
    acc: float
    sen: Optional[float]
    spe: Optional[float]


@dataclass(frozen=True)
class FoldOutcome:
    fold: int
    c: float
    gamma: float
    confusion: np.ndarray
    uar: float
    acc: float
    sen: Optional[float]
    spe: Optional[float]
    test_count: int
    converged: bool

    def __post_init__(self):
        m = np.asarray(self.confusion, dtype=np.int64)
        m.setflags(write=False)
        object.__setattr__(self, "confusion", m)


@dataclass(frozen=True)
class EvalReport:
    classes: tuple
    mode: str
    seed: int
    folds: tuple
    mean_uar: float
    mean_acc: float
    positive_label: Optional[str]
    roc_points: Optional[tuple]
    auc: Optional[float]
    leakage: tuple
    runtime_s: float


# ---------------------------------------------------------------------------
# fold construction
# ---------------------------------------------------------------------------


def _greedy_speaker_assignment(speaker_order, per_speaker_class_counts, classes, k):
    """Assign whole speakers to folds, balancing per-class sample counts.

    Each speaker goes to the fold where adding it gives the smallest
    sum-of-squares class load; ties pick the lowest fold index.
    """
    load = np.zeros((k, len(classes)))
    assignment = {}
    for spk in speaker_order:
        add = per_speaker_class_counts[spk]
        costs = np.sum((load + add[None, :]) ** 2, axis=1)
        fold = int(np.argmin(costs))
        assignment[spk] = fold
        load[fold] += add
    return assignment


def _stratified_assignment(indices, labels, k, rng):
    """Deal each class's shuffled samples round-robin over k folds."""
    assign = {}
    for cl in sorted(set(labels[i] for i in indices)):
        members = [i for i in indices if labels[i] == cl]
        order = [members[j] for j in rng.permutation(len(members))]
        offset = int(rng.integers(k))
        for pos, idx in enumerate(order):
            assign[idx] = (pos + offset) % k
    return assign


def make_folds(samples: Sequence[Sample], mode: str, k_outer: int = 5,
               k_inner: int = 5, seed: int = 0) -> FoldPlan:
    """Build a deterministic nested fold plan for the given samples."""
    if mode not in MODES:
        raise EvaluationError("unknown mode %r; expected one of %s" % (mode, MODES))
    if k_outer < 2 or k_inner < 2:
        raise EvaluationError("fold counts must be at least 2")
    ids = [s.source_id for s in samples]
    if len(set(ids)) != len(ids):
        raise EvaluationError("duplicate source ids in sample set")
    if not samples:
        raise EvaluationError("empty sample set")
    labels = [s.label for s in samples]
    classes = sorted(set(labels))
    rng = np.random.default_rng(seed)
    n = len(samples)

    if mode == SPEAKER_INDEPENDENT:
        speakers = sorted(set(s.speaker_id for s in samples))
        if len(speakers) < k_outer:
            raise EvaluationError(
                "speaker-independent folding needs >= %d speakers, got %d"
                % (k_outer, len(speakers))
            )
        counts = {
            spk: np.array(
                [sum(1 for s in samples if s.speaker_id == spk and s.label == cl)
                 for cl in classes],
                dtype=np.float64,
            )
            for spk in speakers
        }
        order = [speakers[i] for i in rng.permutation(len(speakers))]
        outer_by_speaker = _greedy_speaker_assignment(order, counts, classes, k_outer)
        outer = tuple(outer_by_speaker[s.speaker_id] for s in samples)

        inner = []
        for fold in range(k_outer):
            train_speakers = sorted({s.speaker_id for s, f in zip(samples, outer) if f != fold})
            if len(train_speakers) < k_inner:
                raise EvaluationError(
                    "outer fold %d leaves %d training speakers; inner folding needs >= %d"
                    % (fold, len(train_speakers), k_inner)
                )
            sub_order = [train_speakers[i] for i in rng.permutation(len(train_speakers))]
            by_speaker = _greedy_speaker_assignment(sub_order, counts, classes, k_inner)
            inner.append(tuple(
                by_speaker[s.speaker_id] if f != fold else -1
                for s, f in zip(samples, outer)
            ))
    else:
        for cl in classes:
            count = labels.count(cl)
            if count < k_outer:
                raise EvaluationError(
                    "class %r has %d sample(s); speaker-dependent folding needs >= %d"
                    % (cl, count, k_outer)
                )
        outer_map = _stratified_assignment(range(n), labels, k_outer, rng)
        outer = tuple(outer_map[i] for i in range(n))
        inner = []
        for fold in range(k_outer):
            train_idx = [i for i in range(n) if outer[i] != fold]
            inner_map = _stratified_assignment(train_idx, labels, k_inner, rng)
            inner.append(tuple(
                inner_map[i] if outer[i] != fold else -1 for i in range(n)
            ))

    return FoldPlan(mode, k_outer, k_inner, tuple(ids), outer, tuple(inner), seed)


# ---------------------------------------------------------------------------
# metrics, ROC, statistical tests
# ---------------------------------------------------------------------------


def metrics(confusion, positive_index: Optional[int] = 0) -> Metrics:
    """UAR/ACC from a rows-are-truth confusion matrix; SEN/SPE only for 2x2."""
    m = np.asarray(confusion, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.size == 0:
        raise EvaluationError("confusion matrix must be square and non-empty")
    if np.any(m < 0):
        raise EvaluationError("confusion matrix has negative counts")
    total = float(m.sum())
    if total == 0:
        raise EvaluationError("confusion matrix is all zeros")
    row_sums = m.sum(axis=1)
    present = row_sums > 0
    recalls = np.diag(m)[present] / row_sums[present]
    uar = float(np.mean(recalls))
    acc = float(np.trace(m) / total)
    sen = spe = None
    if m.shape[0] == 2 and positive_index in (0, 1):
        pos, neg = positive_index, 1 - positive_index
        sen = float(m[pos, pos] / row_sums[pos]) if row_sums[pos] > 0 else None
        spe = float(m[neg, neg] / row_sums[neg]) if row_sums[neg] > 0 else None
    return Metrics(uar, acc, sen, spe)


def roc_curve(scores, labels) -> Tuple[tuple, float]:
    """Threshold sweep over descending scores; AUC by trapezoid."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    if s.shape != y.shape or s.ndim != 1:
        raise EvaluationError("scores and labels must be matching 1-D sequences")
    n_pos = int(y.sum())
    n_neg = int((~y).sum())
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("ROC needs both classes present")
    points = [(0.0, 0.0)]
    for thr in np.unique(s)[::-1]:
        hit = s >= thr
        points.append((float((hit & ~y).sum() / n_neg), float((hit & y).sum() / n_pos)))
    if points[-1] != (1.0, 1.0):
        points.append((1.0, 1.0))
    fpr = np.array([p[0] for p in points])
    tpr = np.array([p[1] for p in points])
    auc = float(np.trapezoid(tpr, fpr))
    return tuple(points), auc


def _student_t_sf(t: float, df: float) -> float:
    """Upper-tail probability of Student's t (via the incomplete beta)."""
    x = df / (df + t * t)
    tail = 0.5 * float(betainc(0.5 * df, 0.5, x))
    return tail if t >= 0 else 1.0 - tail


def welch_t_test(a, b) -> Tuple[float, float]:
    """Welch's unequal-variance t statistic and two-sided p-value."""
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.size < 2 or bv.size < 2:
        raise EvaluationError("each group needs at least 2 values")
    va = float(av.var(ddof=1))
    vb = float(bv.var(ddof=1))
    if va == 0.0 or vb == 0.0:
        raise EvaluationError("degenerate (zero-variance) group")
    na, nb = av.size, bv.size
    sa, sb = va / na, vb / nb
    t = (float(av.mean()) - float(bv.mean())) / np.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa ** 2 / (na - 1) + sb ** 2 / (nb - 1))
    p = min(2.0 * _student_t_sf(abs(t), df), 1.0)
    return float(t), float(p)


def chi_square_independence(table) -> Tuple[float, float]:
    """Pearson chi-square on a 2x2 table, df=1, p from the upper incomplete gamma."""
    o = np.asarray(table, dtype=np.float64)
    if o.shape != (2, 2) or np.any(o < 0):
        raise EvaluationError("expected a non-negative 2x2 table")
    rows = o.sum(axis=1)
    cols = o.sum(axis=0)
    if np.any(rows == 0) or np.any(cols == 0):
        raise EvaluationError("zero marginal in contingency table")
    expected = np.outer(rows, cols) / o.sum()
    chi2 = float(((o - expected) ** 2 / expected).sum())
    p = float(gammaincc(0.5, 0.5 * chi2))
    return chi2, p


# ---------------------------------------------------------------------------
# nested cross-validation
# ---------------------------------------------------------------------------


def _feature_matrix(features):
    rows = []
    scheme = None
    for fv in features:
        values = getattr(fv, "values", fv)
        this_scheme = getattr(fv, "scheme", None)
        if this_scheme is not None:
            if scheme is None:
                scheme = this_scheme
            elif this_scheme != scheme:
                raise EvaluationError(
                    "mixed feature schemes: %r vs %r" % (scheme, this_scheme)
                )
        rows.append(np.asarray(values, dtype=np.float64))
    return np.vstack(rows)


def _confusion(classes, truth, predicted):
    index = {cl: i for i, cl in enumerate(classes)}
    m = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(truth, predicted):
        m[index[t], index[p]] += 1
    return m


def _inner_uar(classes, truth, predicted):
    c = _confusion(classes, truth, predicted)
    row_sums = c.sum(axis=1)
    present = row_sums > 0
    return float(np.mean(np.diag(c)[present] / row_sums[present]))


def nested_cv(samples, features, plan: FoldPlan, grid: Grid,
              positive_label: Optional[str] = None, tol: float = SMO_TOL) -> EvalReport:
    """Run the nested loop described by ``plan`` and ``grid``.

    Hyperparameters are chosen per outer fold by mean inner-fold UAR (ties:
    smallest C, then smallest gamma).  Inner folds whose training part lacks a
    trainable class are skipped; a cell with no usable inner fold scores 0.
    """
    started = time.perf_counter()
    ids = tuple(s.source_id for s in samples)
    if ids != plan.source_ids:
        raise EvaluationError("sample set does not match the fold plan")
    x = _feature_matrix(features)
    if x.shape[0] != len(samples):
        raise EvaluationError(
            "feature count %d does not match sample count %d" % (x.shape[0], len(samples))
        )
    labels = np.array([s.label for s in samples], dtype=object)
    classes = tuple(sorted(set(labels.tolist())))
    if len(classes) < 2:
        raise EvaluationError("need at least 2 classes, got %d" % len(classes))
    if positive_label is None and DEFAULT_POSITIVE_LABEL in classes:
        positive_label = DEFAULT_POSITIVE_LABEL
    binary = len(classes) == 2
    if positive_label is not None and positive_label not in classes:
        raise EvaluationError("positive label %r not among classes %s" % (positive_label, classes))
    pos_index = classes.index(positive_label) if (binary and positive_label) else (0 if binary else None)

    outer = np.asarray(plan.outer)
    cells = grid.cells()
    folds = []
    leakage = []
    pooled_scores = []
    pooled_truth = []
    for fold in range(plan.k_outer):
        test_mask = outer == fold
        train_mask = ~test_mask
        if not test_mask.any() or not train_mask.any():
            raise EvaluationError("outer fold %d is degenerate" % fold)
        inner_assign = np.asarray(plan.inner[fold])
        touched_ids = set()
        best = (-1.0, None)
        for c_val, g_val in cells:
            uars = []
            for inner_fold in range(plan.k_inner):
                val_mask = inner_assign == inner_fold
                fit_mask = (inner_assign != -1) & (inner_assign != inner_fold)
                if not val_mask.any() or not fit_mask.any():
                    continue
                fit_labels = labels[fit_mask].tolist()
                cls_counts = {cl: fit_labels.count(cl) for cl in classes}
                if any(count < 2 for count in cls_counts.values()):
                    continue  # a class is missing or untrainable in this inner split
                touched_ids.update(np.array(ids)[val_mask | fit_mask].tolist())
                model = train_multiclass(x[fit_mask], fit_labels, c_val, g_val, tol=tol)
                guesses = predict(model, x[val_mask])
                uars.append(_inner_uar(classes, labels[val_mask].tolist(), guesses))
            score = float(np.mean(uars)) if uars else 0.0
            if score > best[0]:
                best = (score, (c_val, g_val))
        if best[1] is None:
            raise EvaluationError("no usable grid cell in outer fold %d" % fold)
        c_win, g_win = best[1]

        test_ids = set(np.array(ids)[test_mask].tolist())
        overlap = touched_ids & test_ids
        if overlap:
            raise EvaluationError(
                "leakage: %d outer-test sample(s) touched by inner decisions" % len(overlap)
            )
        leakage.append((len(touched_ids), len(test_ids), 0))

        model = train_multiclass(x[train_mask], labels[train_mask].tolist(), c_win, g_win, tol=tol)
        guesses = predict(model, x[test_mask])
        confusion = _confusion(classes, labels[test_mask].tolist(), guesses)
        fold_metrics = metrics(confusion, positive_index=pos_index)
        folds.append(FoldOutcome(
            fold=fold,
            c=c_win,
            gamma=g_win,
            confusion=confusion,
            uar=fold_metrics.uar,
            acc=fold_metrics.acc,
            sen=fold_metrics.sen,
            spe=fold_metrics.spe,
            test_count=int(test_mask.sum()),
            converged=model.converged,
        ))
        if binary:
            _votes, margins = decision_scores(model, x[test_mask])
            pooled_scores.extend(margins[:, pos_index].tolist())
            pooled_truth.extend((labels[test_mask] == classes[pos_index]).tolist())

    roc_points = auc = None
    if binary and pooled_scores:
        roc_points, auc = roc_curve(pooled_scores, pooled_truth)

    return EvalReport(
        classes=classes,
        mode=plan.mode,
        seed=plan.seed,
        folds=tuple(folds),
        mean_uar=float(np.mean([f.uar for f in folds])),
        mean_acc=float(np.mean([f.acc for f in folds])),
        positive_label=classes[pos_index] if pos_index is not None else None,
        roc_points=roc_points,
        auc=auc,
        leakage=tuple(leakage),
        runtime_s=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# report serialization
# ---------------------------------------------------------------------------


def format_report(report: EvalReport, include_runtime: bool = False) -> str:
    """Key-value text document with one nested block per outer fold.

    Runtime is off by default so same-seed runs serialize byte-identically.
    """
    lines = [
        "mode: %s" % report.mode,
        "seed: %d" % report.seed,
        "classes: %s" % ",".join(report.classes),
        "k_outer: %d" % len(report.folds),
        "mean_uar: %r" % report.mean_uar,
        "mean_acc: %r" % report.mean_acc,
    ]
    if report.positive_label is not None:
        lines.append("positive_label: %s" % report.positive_label)
    if report.auc is not None:
        lines.append("auc: %r" % report.auc)
    if include_runtime:
        lines.append("runtime_s: %r" % report.runtime_s)
    for fold, audit in zip(report.folds, report.leakage):
        lines.append("fold %d:" % fold.fold)
        lines.append("  c: %r" % fold.c)
        lines.append("  gamma: %r" % fold.gamma)
        lines.append("  uar: %r" % fold.uar)
        lines.append("  acc: %r" % fold.acc)
        if fold.sen is not None:
            lines.append("  sen: %r" % fold.sen)
        if fold.spe is not None:
            lines.append("  spe: %r" % fold.spe)
        lines.append("  test_count: %d" % fold.test_count)
        lines.append("  inner_ids: %d" % audit[0])
        lines.append("  leaked_ids: %d" % audit[2])
        lines.append("  converged: %s" % fold.converged)
        for row in np.asarray(fold.confusion):
            lines.append("  confusion_row: %s" % ",".join(str(int(v)) for v in row))
    return "\n".join(lines) + "\n"


def fold_metrics_csv(report: EvalReport) -> str:
    """Flat per-fold metrics table."""
    out = ["fold,c,gamma,uar,acc,sen,spe,test_count"]
    for f in report.folds:
        out.append("%d,%r,%r,%r,%r,%s,%s,%d" % (
            f.fold, f.c, f.gamma, f.uar, f.acc,
            "" if f.sen is None else repr(f.sen),
            "" if f.spe is None else repr(f.spe),
            f.test_count,
        ))
    return "\n".join(out) + "\n"


def roc_csv(report: EvalReport) -> str:
    if report.roc_points is None:
        raise EvaluationError("report has no ROC data (not a binary task)")
    out = ["fpr,tpr"]
    for fpr, tpr in report.roc_points:
        out.append("%r,%r" % (fpr, tpr))
    return "\n".join(out) + "\n"
