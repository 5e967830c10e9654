"""Objective functions and their exact gradients.

Three objectives are provided:

* :class:`SmoothNcxLogistic` -- label-folded logistic loss with a bounded
  nonconvex penalty,

      F(x) = (1/n) sum_i ln(1 + exp(-a_i.x)) + lam * sum_j x_j^2/(1+x_j^2),

  the workhorse for the classification experiments.  Each component
  f_i(x) = ln(1+exp(-a_i.x)) + penalty(x) carries the full penalty so the
  single-sample gradient is an unbiased estimate of grad F.
* :class:`SyntheticQuadratic` -- F(x) = (c/2)||x||^2 with n = 1, used as an
  oracle problem (L = c, deterministic gradient).
* :class:`CompositeObjective` -- a smooth part plus a simple nonsmooth
  regularizer (l1 or zero) handled through its prox operator.

Gradients are analytic; softplus and sigmoid are evaluated in the
overflow-safe branchwise forms.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .model import Dataset, SmoothnessInfo


class PowerIterationError(RuntimeError):
    def __init__(self, iterations):
        super().__init__(f"power iteration did not converge in {iterations} iterations")
        self.iterations = iterations


class SmoothNcxLogistic:
    """Folded logistic loss with the bounded nonconvex penalty."""

    def __init__(self, data: Dataset, lam: float):
        if not lam > 0:
            raise ValueError("lambda must be positive")
        self.data = data
        self.lam = lam
        indptr, indices, values = data.to_csr()
        self.matrix = sp.csr_matrix(
            (values, indices.astype(np.int32), indptr.astype(np.int32)),
            shape=(data.n, data.dim),
        )
        self.row_norms_sq = data.row_norms_sq()

    @property
    def n(self):
        return self.data.n

    @property
    def dim(self):
        return self.data.dim


@dataclass(frozen=True)
class SyntheticQuadratic:
    """F(x) = (curvature/2) ||x||^2, a single-sample finite sum."""

    curvature: float
    dim: int = 2

    def __post_init__(self):
        if not self.curvature > 0:
            raise ValueError("curvature must be positive")

    @property
    def n(self):
        return 1


@dataclass(frozen=True)
class L1Spec:
    """h(x) = tau * ||x||_1."""

    tau: float

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")


@dataclass(frozen=True)
class ZeroSpec:
    """h(x) = 0; prox is the identity."""


@dataclass(frozen=True)
class CompositeObjective:
    smooth_part: object
    h: Union[L1Spec, ZeroSpec]
    eta: float = 0.2

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")


def _check_dim(objective, x):
    d = objective.dim
    if len(x) != d:
        raise ValueError(f"x has dim {len(x)}, objective expects {d}")


def penalty_value(x, lam):
    s = x * x
    return lam * float(np.sum(s / (1.0 + s)))


def penalty_gradient(x, lam):
    w = 1.0 + x * x
    return (2.0 * lam) * x / (w * w)


def loss(objective, x) -> float:
    """Exact objective value at x."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(objective, CompositeObjective):
        base = loss(objective.smooth_part, x)
        if isinstance(objective.h, L1Spec):
            return base + objective.h.tau * float(np.sum(np.abs(x)))
        return base
    _check_dim(objective, x)
    if isinstance(objective, SyntheticQuadratic):
        return 0.5 * objective.curvature * float(x @ x)
    z = objective.matrix @ x
    # ln(1 + exp(-z)) evaluated as logaddexp(0, -z) to dodge overflow.
    return float(np.mean(np.logaddexp(0.0, -z))) + penalty_value(x, objective.lam)


def full_gradient(objective, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if isinstance(objective, CompositeObjective):
        return full_gradient(objective.smooth_part, x)
    _check_dim(objective, x)
    if isinstance(objective, SyntheticQuadratic):
        return objective.curvature * x
    z = objective.matrix @ x
    s = expit(-z)
    g = -(objective.matrix.T @ s) / objective.n
    return g + penalty_gradient(x, objective.lam)


def loss_and_gradient(objective, x):
    """(F(x), grad F(x)) sharing the margin pass."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(objective, CompositeObjective):
        return loss_and_gradient(objective.smooth_part, x)
    _check_dim(objective, x)
    if isinstance(objective, SyntheticQuadratic):
        return 0.5 * objective.curvature * float(x @ x), objective.curvature * x
    z = objective.matrix @ x
    value = float(np.mean(np.logaddexp(0.0, -z))) + penalty_value(x, objective.lam)
    s = expit(-z)
    g = -(objective.matrix.T @ s) / objective.n + penalty_gradient(x, objective.lam)
    return value, g


def per_sample_gradient(objective, x, i) -> np.ndarray:
    """Gradient of the i-th component f_i (penalty included)."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(objective, CompositeObjective):
        return per_sample_gradient(objective.smooth_part, x, i)
    _check_dim(objective, x)
    if isinstance(objective, SyntheticQuadratic):
        if i != 0:
            raise IndexError("quadratic objective has a single sample")
        return objective.curvature * x
    if not 0 <= i < objective.n:
        raise IndexError(f"sample index {i} out of range [0, {objective.n})")
    row = objective.matrix.getrow(i)
    z = float(row @ x)
    s = float(expit(-z))
    g = penalty_gradient(x, objective.lam)
    g[row.indices] += -s * row.data
    return g


def stochastic_second_moment(objective, x) -> float:
    """Exact E||g||^2 under single-sample uniform sampling,
    (1/n) sum_i ||grad f_i(x)||^2."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(objective, CompositeObjective):
        return stochastic_second_moment(objective.smooth_part, x)
    _check_dim(objective, x)
    if isinstance(objective, SyntheticQuadratic):
        g = objective.curvature * x
        return float(g @ g)
    z = objective.matrix @ x
    s = expit(-z)
    p = penalty_gradient(x, objective.lam)
    g = full_gradient(objective, x)
    m2 = float(np.mean(s * s * objective.row_norms_sq))
    # ||grad f_i||^2 = s_i^2 ||a_i||^2 - 2 s_i a_i.p + ||p||^2 and
    # (1/n) sum s_i a_i = p - grad F, hence the closed form below.
    return m2 - float(p @ p) + 2.0 * float(p @ g)


def gradient_variance(objective, x) -> float:
    """(1/n) sum_i ||grad f_i - grad F||^2 = E||g||^2 - ||grad F||^2."""
    g = full_gradient(objective, x)
    return stochastic_second_moment(objective, x) - float(g @ g)


def smoothness_constant(objective, tol=1e-6, max_iter=1000) -> SmoothnessInfo:
    """Gradient Lipschitz constant.

    Quadratic: L = curvature (constant Hessian).  Logistic with penalty:
    L = lambda_max((1/4n) A^T A) + 2*lam, the logistic curvature bound 1/4
    plus the penalty's max curvature 2 at the origin; the top eigenvalue
    comes from power iteration with a deterministic all-ones start.
    """
    if isinstance(objective, CompositeObjective):
        return smoothness_constant(objective.smooth_part, tol=tol, max_iter=max_iter)
    if isinstance(objective, SyntheticQuadratic):
        return SmoothnessInfo(objective.curvature, "analytic")
    A = objective.matrix
    n = objective.n
    v = np.ones(objective.dim) / np.sqrt(objective.dim)
    lam_max = 0.0
    converged = False
    for _ in range(max_iter):
        w = A.T @ (A @ v) / (4.0 * n)
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            # Zero Gram matrix (e.g. all-zero rows): top eigenvalue is 0.
            lam_max = 0.0
            converged = True
            break
        v_new = w / norm
        est = float(v_new @ (A.T @ (A @ v_new))) / (4.0 * n)
        if abs(est - lam_max) <= tol * max(abs(est), 1e-300):
            lam_max = est
            converged = True
            break
        lam_max = est
        v = v_new
    if not converged:
        raise PowerIterationError(max_iter)
    return SmoothnessInfo(lam_max + 2.0 * objective.lam, "power-iteration")


def prox(h_spec, step, v) -> np.ndarray:
    """prox of step*h at v: soft threshold for l1, identity for zero h."""
    if not step > 0:
        raise ValueError("prox step must be positive")
    v = np.asarray(v, dtype=np.float64)
    if isinstance(h_spec, ZeroSpec):
        return v
    if isinstance(h_spec, L1Spec):
        thr = step * h_spec.tau
        return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)
    raise TypeError(f"unsupported regularizer spec {h_spec!r}")


def gradient_mapping(composite: CompositeObjective, x, eta=None) -> np.ndarray:
    """Prox-gradient residual G_eta(x) = (x - prox(h, eta, x - eta*grad f(x))) / eta.

    With h = 0 this returns grad f(x) exactly (no round trip through the
    prox arithmetic), preserving G == gradient as an identity.
    """
    if eta is None:
        eta = composite.eta
    if not eta > 0:
        raise ValueError("eta must be positive")
    x = np.asarray(x, dtype=np.float64)
    g = full_gradient(composite.smooth_part, x)
    if isinstance(composite.h, ZeroSpec):
        return g
    inner = prox(composite.h, eta, x - eta * g)
    return (x - inner) / eta
