"""Soft-margin RBF-kernel SVM trained by sequential minimal optimization.

The binary solver keeps the full kernel matrix in memory and updates the
maximal-violating pair each step.  Multi-class classification is one-vs-one
with majority voting; ties fall back to summed decision margins and finally
to lexicographic class order.  Feature standardization is fitted on training
data only and travels with the model.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import TrainingError

STD_FLOOR = 1e-8
SMO_TOL = 1e-3
_BOUND_EPS = 1e-12


@dataclass(frozen=True)
class Standardizer:
    """Per-dimension z-score parameters with the std floored at 1e-8."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64).ravel()
        s = np.asarray(self.std, dtype=np.float64).ravel()
        if m.shape != s.shape:
            raise ValueError("mean/std length mismatch")
        if np.any(s < STD_FLOOR * (1.0 - 1e-12)):
            raise ValueError("std below the %g floor" % STD_FLOOR)
        m = m.copy()
        s = s.copy()
        m.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)

    def transform(self, x) -> np.ndarray:
        z = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if z.shape[1] != self.mean.shape[0]:
            raise ValueError(
                "feature dim %d does not match fitted dim %d" % (z.shape[1], self.mean.shape[0])
            )
        return (z - self.mean) / self.std


def fit_standardizer(x) -> Standardizer:
    """Fit z-score parameters; call with training rows only."""
    z = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if z.size == 0:
        raise ValueError("cannot standardize an empty matrix")
    return Standardizer(z.mean(axis=0), np.maximum(z.std(axis=0), STD_FLOOR))


def rbf_kernel(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    a = np.asarray(x, dtype=np.float64).ravel()
    b = np.asarray(y, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError("kernel arguments differ in dimension")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d = a - b
    return float(np.exp(-gamma * np.dot(d, d)))


def _kernel_matrix(a, b, gamma):
    sq = (
        np.sum(a ** 2, axis=1)[:, None]
        + np.sum(b ** 2, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-gamma * np.maximum(sq, 0.0))


@dataclass(frozen=True)
class BinarySvm:
    """RBF SVM decision function f(x) = sum_i coef_i k(sv_i, x) + bias.

    ``alphas`` keeps the full dual vector in training order so optimality
    conditions can be audited after the fact.
    """

    support_vectors: np.ndarray
    dual_coef: np.ndarray
    bias: float
    c: float
    gamma: float
    converged: bool = True
    alphas: np.ndarray = None

    def decision_values(self, x) -> np.ndarray:
        z = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.support_vectors.size and z.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(
                "feature dim %d does not match model dim %d"
                % (z.shape[1], self.support_vectors.shape[1])
            )
        if self.support_vectors.size == 0:
            return np.full(z.shape[0], self.bias)
        k = _kernel_matrix(z, self.support_vectors, self.gamma)
        return k @ self.dual_coef + self.bias


def dual_objective(svm: BinarySvm) -> float:
    """Value of the SVM dual sum(alpha) - 0.5 * sum alpha_i alpha_j y_i y_j K_ij."""
    coef = svm.dual_coef
    if coef.size == 0:
        return 0.0
    k = _kernel_matrix(svm.support_vectors, svm.support_vectors, svm.gamma)
    return float(np.sum(np.abs(coef)) - 0.5 * coef @ k @ coef)


def train_binary_smo(
    x,
    y,
    c: float,
    gamma: float,
    tol: float = SMO_TOL,
    max_passes: Optional[int] = None,
    sample_c=None,
) -> BinarySvm:
    """Solve the soft-margin dual by maximal-violating-pair SMO.

    ``sample_c`` optionally overrides the box bound per sample (used for class
    weighting).  If the violation gap is still above ``tol`` after
    ``max_passes`` pair updates (default 10 * n), the best-effort model is
    returned with ``converged`` False.
    """
    xm = np.atleast_2d(np.asarray(x, dtype=np.float64))
    yv = np.asarray(y, dtype=np.float64).ravel()
    n = xm.shape[0]
    if yv.shape[0] != n:
        raise TrainingError("label count does not match sample count")
    if not np.all(np.isin(yv, (-1.0, 1.0))):
        raise TrainingError("binary labels must be -1 or +1")
    if np.all(yv == yv[0]):
        raise TrainingError("training data contains a single class")
    if c <= 0 or gamma <= 0:
        raise TrainingError("C and gamma must be positive")
    if max_passes is None:
        max_passes = 10 * n
    cbox = np.full(n, float(c)) if sample_c is None else np.asarray(sample_c, dtype=np.float64)
    if cbox.shape != (n,) or np.any(cbox <= 0):
        raise TrainingError("per-sample box bounds must be positive, one per sample")

    k = _kernel_matrix(xm, xm, gamma)
    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the dual objective being minimized
    eps = _BOUND_EPS * (1.0 + cbox)
    converged = False
    for _ in range(int(max_passes)):
        below_c = alpha < cbox - eps
        above_0 = alpha > eps
        up = ((yv > 0) & below_c) | ((yv < 0) & above_0)
        low = ((yv > 0) & above_0) | ((yv < 0) & below_c)
        if not (up.any() and low.any()):
            converged = True
            break
        viol = -yv * grad
        i = int(np.flatnonzero(up)[np.argmax(viol[up])])
        j = int(np.flatnonzero(low)[np.argmin(viol[low])])
        gap = viol[i] - viol[j]
        if gap <= tol:
            converged = True
            break
        curv = max(k[i, i] + k[j, j] - 2.0 * k[i, j], 1e-12)
        step = gap / curv
        step = min(step, cbox[i] - alpha[i] if yv[i] > 0 else alpha[i])
        step = min(step, alpha[j] if yv[j] > 0 else cbox[j] - alpha[j])
        step = max(step, 0.0)
        alpha[i] += yv[i] * step
        alpha[j] -= yv[j] * step
        grad += step * yv * (k[:, i] - k[:, j])

    alpha = np.clip(alpha, 0.0, cbox)
    fvals = k @ (alpha * yv)
    u = yv - fvals
    free = (alpha > eps) & (alpha < cbox - eps)
    if free.any():
        bias = float(u[free].mean())
    else:
        below_c = alpha < cbox - eps
        above_0 = alpha > eps
        up = ((yv > 0) & below_c) | ((yv < 0) & above_0)
        low = ((yv > 0) & above_0) | ((yv < 0) & below_c)
        hi = u[up].max() if up.any() else 0.0
        lo = u[low].min() if low.any() else 0.0
        bias = 0.5 * float(hi + lo)

    kept = alpha > 0.0
    model_alpha = alpha.copy()
    model_alpha.setflags(write=False)
    return BinarySvm(
        support_vectors=xm[kept].copy(),
        dual_coef=(alpha * yv)[kept],
        bias=bias,
        c=float(c),
        gamma=float(gamma),
        converged=converged,
        alphas=model_alpha,
    )


@dataclass(frozen=True)
class MulticlassSvm:
    """One-vs-one ensemble with a shared train-fitted standardizer."""

    classes: tuple
    machines: Dict[Tuple, BinarySvm]
    standardizer: Standardizer
    c: float
    gamma: float

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines.values())


def train_multiclass(
    x,
    labels,
    c: float,
    gamma: float,
    tol: float = SMO_TOL,
    class_weight: Optional[Dict] = None,
) -> MulticlassSvm:
    """Train k(k-1)/2 pairwise machines on standardized features.

    In each pairwise machine the lexicographically smaller class takes the +1
    side.  ``class_weight`` maps labels to multipliers on C (default: none).
    """
    xm = np.atleast_2d(np.asarray(x, dtype=np.float64))
    lab = list(labels)
    if len(lab) != xm.shape[0]:
        raise TrainingError("label count does not match sample count")
    classes = sorted(set(lab))
    if len(classes) < 2:
        raise TrainingError("need at least 2 classes, got %d" % len(classes))
    counts = {cl: lab.count(cl) for cl in classes}
    for cl in classes:
        if counts[cl] < 2:
            raise TrainingError("class %r has %d sample(s); need at least 2" % (cl, counts[cl]))

    scaler = fit_standardizer(xm)
    z = scaler.transform(xm)
    lab_arr = np.array(lab, dtype=object)
    weights = {cl: 1.0 for cl in classes}
    if class_weight:
        weights.update({cl: float(w) for cl, w in class_weight.items()})

    machines = {}
    for ia in range(len(classes)):
        for ib in range(ia + 1, len(classes)):
            a, b = classes[ia], classes[ib]
            mask = (lab_arr == a) | (lab_arr == b)
            sub_lab = lab_arr[mask]
            yv = np.where(sub_lab == a, 1.0, -1.0)
            sample_c = np.array([c * weights[cl] for cl in sub_lab], dtype=np.float64)
            machines[(a, b)] = train_binary_smo(
                z[mask], yv, c, gamma, tol=tol, sample_c=sample_c
            )
    return MulticlassSvm(tuple(classes), machines, scaler, float(c), float(gamma))


def decision_scores(model: MulticlassSvm, x) -> Tuple[np.ndarray, np.ndarray]:
    """Per-class vote counts and summed signed margins, ordered like model.classes."""
    z = model.standardizer.transform(x)
    n_classes = len(model.classes)
    index = {cl: i for i, cl in enumerate(model.classes)}
    votes = np.zeros((z.shape[0], n_classes))
    margins = np.zeros((z.shape[0], n_classes))
    for (a, b), machine in model.machines.items():
        f = machine.decision_values(z)
        ia, ib = index[a], index[b]
        margins[:, ia] += f
        margins[:, ib] -= f
        votes[:, ia] += (f > 0).astype(np.float64)
        votes[:, ib] += (f <= 0).astype(np.float64)
    return votes, margins


def predict(model: MulticlassSvm, x) -> list:
    """Majority vote; ties resolved by summed margin, then class order."""
    votes, margins = decision_scores(model, x)
    out = []
    for v, mg in zip(votes, margins):
        tied = np.flatnonzero(v == v.max())
        if tied.size > 1:
            tied = tied[mg[tied] == mg[tied].max()]
        out.append(model.classes[int(tied[0])])
    return out
