"""Closed-form convergence bounds, the descent-inequality audit, and
constant estimation.

The calculators evaluate the tail-convergence and stationary-density
bounds that hold for SGD-type runs under three standing assumptions: a
global minimum exists, every component is L-smooth, and the stochastic
gradient second moment obeys E||g||^2 <= 2A(F-F*) + B||grad F||^2 + C.
Reshuffled runs use the companion variance bound
(1/n) sum ||grad f_i - grad F||^2 <= 2*calA*(F-F*) + calB.

Products of (1 + L*A*gamma_t^2) factors are evaluated in log space so
horizons up to 10^6 cannot overflow.  Domain violations that make a
formula undefined raise ValueError; soft precondition violations are
reported as warning flags on the result instead of refusing to evaluate,
since probing a bound outside its validity region is a legitimate use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .losses import (
    loss,
    loss_and_gradient,
    per_sample_gradient,
    smoothness_constant,
    stochastic_second_moment,
)
from .model import ESConstants, OptimumEstimate, RRVarianceConstants
from .rng import SplitMix64

LN3 = math.log(3.0)


@dataclass(frozen=True)
class BoundInputs:
    """Scalar inputs shared by the bound calculators.

    gamma0 is the constant step value or the initial scale of a decreasing
    schedule, depending on the calculator.
    """

    delta0: float
    L: float
    es: ESConstants
    T: int
    gamma0: float
    eta: float = 1.0
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.delta0 < 0:
            raise ValueError("delta0 must be nonnegative")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.gamma0 > 0:
            raise ValueError("gamma0 must be positive")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must lie in (0, 1]")


@dataclass(frozen=True)
class BoundValue:
    value: float
    flags: tuple = ()

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class TailMinPair:
    refined: float
    coarse: float
    flags: tuple = ()


@dataclass(frozen=True)
class DensityBound:
    value: float
    d_term: Optional[float] = None
    flags: tuple = ()

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class ThresholdReport:
    T_required: int
    binding_term: str
    preconditions_ok: tuple
    T_real: float
    terms: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuditReport:
    violations: tuple
    max_violation: float
    checked: int
    flags: tuple = ()


def _c_over_a(C: float, A: float) -> float:
    """C/A with the convention 0/0 = 0; undefined when C > 0 and A = 0."""
    if C == 0.0:
        return 0.0
    if A == 0.0:
        raise ValueError("C/A undefined: A = 0 with C > 0")
    return C / A


def _log_dprod(L: float, A: float, gammas) -> float:
    """ln prod_t (1 + L A gamma_t^2)."""
    acc = 0.0
    for g in gammas:
        acc += math.log1p(L * A * g * g)
    return acc


def weighted_gradsum_bound(inputs: BoundInputs, gammas: Sequence[float]) -> BoundValue:
    """Upper bound on sum_t gamma_t r_{t-1}: (2*delta0 + C/A) * prod(1 + L A gamma_t^2).

    Valid for any step sequence with gamma_t <= 1/(L*B); steps above that
    ceiling only raise a flag.
    """
    es = inputs.es
    coa = _c_over_a(es.C, es.A)
    flags = []
    if es.B > 0 and any(g > 1.0 / (inputs.L * es.B) for g in gammas):
        flags.append("some gamma_t exceeds 1/(L*B)")
    d_total = math.exp(_log_dprod(inputs.L, es.A, gammas))
    return BoundValue((2.0 * inputs.delta0 + coa) * d_total, tuple(flags))


def min_grad_bound_constant_step(inputs: BoundInputs) -> BoundValue:
    """O(1/sqrt(T)) bound on the best gradient norm over the whole run,
    3*sqrt(L*A)/(ln(3)*sqrt(T)) * (2*delta0 + C/A), for the tuned constant step."""
    es = inputs.es
    coa = _c_over_a(es.C, es.A)
    flags = []
    if es.A > 0 and inputs.T < LN3 * inputs.L * es.B * es.B / es.A:
        flags.append("T below ln(3)*L*B^2/A; tuned step violates gamma <= 1/(L*B)")
    value = 3.0 * math.sqrt(inputs.L * es.A) / (LN3 * math.sqrt(inputs.T)) * (
        2.0 * inputs.delta0 + coa
    )
    return BoundValue(value, tuple(flags))


def min_grad_bound_power_step(inputs: BoundInputs) -> BoundValue:
    """Best-gradient bound for steps gamma * t^(-alpha), alpha in (1/2, 1):
    (1-alpha)/(gamma T^(1-alpha)) * (2*delta0 + C/A) * exp(2 alpha gamma^2 L A/(2 alpha - 1))."""
    if inputs.alpha is None or not (0.5 < inputs.alpha < 1.0):
        raise ValueError("alpha must lie in (1/2, 1)")
    es = inputs.es
    a = inputs.alpha
    coa = _c_over_a(es.C, es.A)
    value = (
        (1.0 - a)
        / (inputs.gamma0 * inputs.T ** (1.0 - a))
        * (2.0 * inputs.delta0 + coa)
        * math.exp(2.0 * a * inputs.gamma0**2 * inputs.L * es.A / (2.0 * a - 1.0))
    )
    return BoundValue(value)


def tail_min_bound_general(inputs: BoundInputs, gammas: Sequence[float], k: int,
                           observed_head_min: Optional[float] = None,
                           observed_delta_T: Optional[float] = None) -> TailMinPair:
    """Bound on min_{k<=t<=T} r_t for any admissible step sequence.

    coarse  = (2*delta0 + C/A) * L*A*gamma_k*D_k
    refined subtracts 2*delta_T/D_T and min-head-gradient corrections when
    those observations are supplied; with both at zero the two coincide.
    """
    es = inputs.es
    T = len(gammas)
    if not 1 <= k <= T:
        raise ValueError(f"k must lie in [1, {T}]")
    coa = _c_over_a(es.C, es.A)
    flags = []
    if es.B > 0 and any(g > 1.0 / (inputs.L * es.B) for g in gammas):
        flags.append("some gamma_t exceeds 1/(L*B)")
    log_dk = _log_dprod(inputs.L, es.A, gammas[:k])
    scale = inputs.L * es.A * gammas[k - 1] * math.exp(log_dk)
    base = 2.0 * inputs.delta0 + coa
    coarse = base * scale
    refined_base = base
    if observed_delta_T is not None:
        log_dt = _log_dprod(inputs.L, es.A, gammas)
        refined_base -= 2.0 * observed_delta_T * math.exp(-log_dt)
    if observed_head_min is not None:
        if inputs.L * es.A * gammas[0] == 0.0:
            raise ValueError("head-min correction needs L*A*gamma_1 > 0")
        refined_base -= observed_head_min / (inputs.L * es.A * gammas[0])
    return TailMinPair(refined_base * scale, coarse, tuple(flags))


def tail_min_bound_constant_step(inputs: BoundInputs) -> BoundValue:
    """Bound on the best gradient norm inside the final eta*T window for a
    constant step: 2*(3*delta0 + C/A) / ((eta*T - 1)*gamma)."""
    es = inputs.es
    coa = _c_over_a(es.C, es.A)
    if inputs.eta * inputs.T <= 1.0:
        raise ValueError("eta*T must exceed 1 (tail window would be empty)")
    flags = []
    g = inputs.gamma0
    if inputs.L * es.B * g > 1.0:
        flags.append("L*B*gamma exceeds 1")
    if (inputs.T + 1.0) * math.log1p(inputs.L * es.A * g * g) > LN3:
        flags.append("(1 + L*A*gamma^2)^(T+1) exceeds 3")
    value = 2.0 * (3.0 * inputs.delta0 + coa) / ((inputs.eta * inputs.T - 1.0) * g)
    return BoundValue(value, tuple(flags))


def iterations_for_tail_stationary(epsilon: float, eta: float, L: float,
                                   es: ESConstants, delta0: float) -> ThresholdReport:
    """Iterations guaranteeing an epsilon-stationary point in the final
    eta*T window under the tuned constant step.

    T_required = ceil(max of three terms); the binding term is reported as
    epsilon_term, stepsize_term, or eta_term.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if not es.A > 0:
        raise ValueError("threshold needs A > 0")
    coa = _c_over_a(es.C, es.A)
    eps_term = (4.0 * math.sqrt(2.0 * L * es.A) * (3.0 * delta0 + coa)
                / (epsilon * eta * math.sqrt(LN3))) ** 2
    step_term = L * es.B * es.B * LN3 / es.A - 1.0
    eta_term = 2.0 / eta
    terms = {"epsilon_term": eps_term, "stepsize_term": step_term, "eta_term": eta_term}
    binding = max(terms, key=lambda k: terms[k])
    t_real = terms[binding]
    t_req = max(1, math.ceil(t_real))
    ok = (math.isfinite(eps_term), math.isfinite(step_term), math.isfinite(eta_term))
    return ThresholdReport(t_req, binding, ok, t_real, terms)


def tail_min_bound_inv_sqrt_step(inputs: BoundInputs, variant: str = "derivation") -> BoundValue:
    """Tail bound for the decreasing step gamma0/sqrt(t+1).

    value = (delta0 + (L*C*gamma0^2/2)(ln(T+1)+1))
            / ((1 - L*A*gamma0^2*ln(T+1)) * C_T)

    where the window coefficient C_T uses leading factor eta ("stated"
    variant) or 1 - sqrt(1-eta) ("derivation" variant, the default: it is
    the factor the telescoping argument actually yields, and since
    1 - sqrt(1-eta) <= eta it gives the larger, safer bound).
    Requires gamma0^2 < 1/(L*A*ln(T+1)).
    """
    if variant not in ("theorem_stated", "stated", "derivation"):
        raise ValueError(f"unknown variant {variant!r}")
    es = inputs.es
    g0, L, T, eta = inputs.gamma0, inputs.L, inputs.T, inputs.eta
    log_t1 = math.log(T + 1.0)
    if es.A > 0 and g0 * g0 >= 1.0 / (L * es.A * log_t1):
        raise ValueError("gamma0^2 must stay below 1/(L*A*ln(T+1))")
    lead = eta if variant in ("theorem_stated", "stated") else 1.0 - math.sqrt(1.0 - eta)
    window = (
        g0 * lead * math.sqrt(T + 1.0)
        - (L * es.B * g0 * g0 / 2.0) * log_t1
        + (L * es.B * g0 * g0 / 2.0) * math.log(math.floor((1.0 - eta) * T) + 1.0)
    )
    flags = []
    if window <= 0:
        flags.append("window coefficient nonpositive; bound not meaningful")
    numerator = inputs.delta0 + (L * es.C * g0 * g0 / 2.0) * (log_t1 + 1.0)
    value = numerator / ((1.0 - L * es.A * g0 * g0 * log_t1) * window)
    return BoundValue(value, tuple(flags))


def density_bound_constant_step(inputs: BoundInputs, epsilon: float) -> DensityBound:
    """Lower bound on the fraction of epsilon-stationary iterates in the
    final eta*T window, constant step:

    1 - (1/T) * ln((6*delta0*L*gamma*A + 2*C*L*gamma)/epsilon + 1)
              / (eta * ln(1 + L*gamma^2*A))
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    es = inputs.es
    if not es.A > 0:
        raise ValueError("density bound needs A > 0")
    g, L, T, eta = inputs.gamma0, inputs.L, inputs.T, inputs.eta
    flags = []
    if L * es.B * g > 1.0:
        flags.append("L*B*gamma exceeds 1")
    if (T + 1.0) * math.log1p(L * es.A * g * g) > LN3:
        flags.append("(1 + L*A*gamma^2)^(T+1) exceeds 3")
    ratio = (6.0 * inputs.delta0 * L * g * es.A + 2.0 * es.C * L * g) / epsilon
    value = 1.0 - (1.0 / T) * math.log1p(ratio) / (eta * math.log1p(L * g * g * es.A))
    if value < 0:
        flags.append("vacuous (below 0)")
    return DensityBound(value, None, tuple(flags))


def density_bound_inv_sqrt_step(inputs: BoundInputs, epsilon: float) -> DensityBound:
    """Density lower bound for the step gamma0/sqrt(t+1):

    1 - 2*D/(gamma0*eta*sqrt(T)) + D^2/(gamma0^2*eta*T),
    D = (delta0 + (L*C/2)*gamma0^2*(ln(T+1)+1)) / (1 + L*gamma0^2*A*(T+1))
        + (L*B*gamma0^2/2)*ln(T+1)
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    es = inputs.es
    g0, L, T, eta = inputs.gamma0, inputs.L, inputs.T, inputs.eta
    log_t1 = math.log(T + 1.0)
    d_term = (
        (inputs.delta0 + (L * es.C / 2.0) * g0 * g0 * (log_t1 + 1.0))
        / (1.0 + L * g0 * g0 * es.A * (T + 1.0))
        + (L * es.B * g0 * g0 / 2.0) * log_t1
    )
    value = 1.0 - 2.0 * d_term / (g0 * eta * math.sqrt(T)) + d_term**2 / (g0 * g0 * eta * T)
    flags = []
    if value < 0:
        flags.append("vacuous (below 0)")
    return DensityBound(value, d_term, tuple(flags))


def tail_start_for_power_step(epsilon: float, gamma: float, alpha: float, L: float,
                              es: ESConstants, delta0: float) -> ThresholdReport:
    """First index k such that the best gradient norm past k drops below
    epsilon under steps gamma * t^(-alpha):

    k >= ((1-alpha)/(gamma*epsilon) * (2*delta0 + C/A)
          * exp(2 alpha gamma^2 L A/(2 alpha - 1)))^(1/(1-alpha))
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0.5 < alpha < 1.0:
        raise ValueError("alpha must lie in (1/2, 1)")
    coa = _c_over_a(es.C, es.A)
    base = (
        (1.0 - alpha)
        / (gamma * epsilon)
        * (2.0 * delta0 + coa)
        * math.exp(2.0 * alpha * gamma * gamma * L * es.A / (2.0 * alpha - 1.0))
    )
    k_real = base ** (1.0 / (1.0 - alpha))
    k = max(1, math.ceil(k_real))
    return ThresholdReport(k, "epsilon_term", (math.isfinite(k_real),), k_real,
                           {"epsilon_term": k_real})


def epochs_for_tail_stationary_rr(epsilon: float, eta: float, L: float, n: int,
                                  rr_consts: RRVarianceConstants,
                                  delta0: float) -> ThresholdReport:
    """Epoch budget guaranteeing an epsilon-stationary point in the final
    eta*T epochs of a reshuffled run, under the tuned cube-root step.

    T_required = ceil(max{27*(3*delta0 + calB/calA)^3 * calA*L^2/(n*eta^2*eps^2),
                          8*L*n*ln(3)/calA - 1, 2/eta}).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not rr_consts.calA > 0:
        raise ValueError("threshold needs calA > 0")
    boa = _c_over_a(rr_consts.calB, rr_consts.calA)
    eps_term = (27.0 * (3.0 * delta0 + boa) ** 3 * rr_consts.calA * L * L
                / (n * eta * eta * epsilon * epsilon))
    step_term = 8.0 * L * n * LN3 / rr_consts.calA - 1.0
    eta_term = 2.0 / eta
    terms = {"epsilon_term": eps_term, "stepsize_term": step_term, "eta_term": eta_term}
    binding = max(terms, key=lambda k: terms[k])
    t_real = terms[binding]
    return ThresholdReport(max(1, math.ceil(t_real)), binding,
                           (math.isfinite(eps_term), math.isfinite(step_term),
                            math.isfinite(eta_term)),
                           t_real, terms)


# Descent-inequality audits ------------------------------------------------------


def _require_consecutive(trace):
    ts = trace.t_array()
    if len(ts) < 2 or not np.all(np.diff(ts) == 1):
        raise ValueError("audit needs consecutive logged points (log_stride == 1)")
    return ts


def _per_step_margin(trace, L, es):
    """rhs - lhs of the per-step descent inequality, one value per step."""
    r = trace.r_hat_array()[:-1]
    delta = trace.delta_hat_array()
    gam = trace.gamma_array()[:-1]
    lhs = gam * (1.0 - L * es.B * gam / 2.0) * r
    rhs = (1.0 + L * es.A * gam * gam) * delta[:-1] - delta[1:] + L * es.C * gam * gam / 2.0
    return lhs, rhs


def audit_descent(traces, L: float, es: ESConstants, mode: str = "deterministic",
                  tol: float = 1e-12) -> AuditReport:
    """Check the per-iteration descent inequality

        gamma_t (1 - L*B*gamma_t/2) r_t <= (1 + L*A*gamma_t^2) delta_t
                                            - delta_{t+1} + L*C*gamma_t^2/2

    against one trace (deterministic mode, meant for full-batch descent
    with (A,B,C) = (0,1,0)) or per-iterate means over >= 10 seeds
    (ensemble mode, flagging violations beyond 3 standard errors).
    """
    if mode == "deterministic":
        trace = traces[0] if isinstance(traces, (list, tuple)) else traces
        ts = _require_consecutive(trace)
        lhs, rhs = _per_step_margin(trace, L, es)
        slack = tol * np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1.0)
        bad = lhs > rhs + slack
        viol = tuple(int(ts[i]) for i in np.nonzero(bad)[0])
        return AuditReport(viol, float(np.max(lhs - rhs)), len(lhs))
    if mode != "ensemble":
        raise ValueError(f"unknown audit mode {mode!r}")
    if not isinstance(traces, (list, tuple)) or len(traces) < 10:
        raise ValueError("ensemble audit needs at least 10 traces")
    ts0 = _require_consecutive(traces[0])
    margins = []
    for tr in traces:
        ts = _require_consecutive(tr)
        if not np.array_equal(ts, ts0):
            raise ValueError("ensemble audit needs identical logged index sets")
        lhs, rhs = _per_step_margin(tr, L, es)
        margins.append(rhs - lhs)
    M = np.vstack(margins)
    mean = M.mean(axis=0)
    se = M.std(axis=0, ddof=1) / math.sqrt(M.shape[0])
    bad = mean < -3.0 * se
    viol = tuple(int(ts0[i]) for i in np.nonzero(bad)[0])
    return AuditReport(viol, float(np.max(-mean)), len(mean))


def audit_descent_rr(traces, L: float, n: int, rr_consts: RRVarianceConstants,
                     batch_size: Optional[int] = None) -> AuditReport:
    """Epoch-level descent audit for reshuffled runs:

        (gamma*n/2)(1 - gamma^2 L^2 n^2) r_e <= (1 + calA L^2 n^2 gamma^3) delta_e
                                                 - delta_{e+1} + L^2 gamma^3 n^2 calB/2

    evaluated on per-epoch means over >= 10 seeds at the epoch-boundary
    log points.  Requires the epoch step gamma <= 1/(2*L*n) (flagged).
    """
    if not isinstance(traces, (list, tuple)) or len(traces) < 10:
        raise ValueError("reshuffling audit needs at least 10 traces")
    b = batch_size if batch_size is not None else traces[0].config.batch_size
    upe = (n + b - 1) // b
    margins = None
    flags = set()
    ts0 = None
    for tr in traces:
        ts = tr.t_array()
        sel = np.nonzero(ts % upe == 0)[0]
        ts_e = ts[sel]
        if ts0 is None:
            ts0 = ts_e
        elif not np.array_equal(ts_e, ts0):
            raise ValueError("ensemble audit needs identical epoch boundaries")
        r = tr.r_hat_array()[sel][:-1]
        delta = tr.delta_hat_array()[sel]
        gam = tr.gamma_array()[sel][:-1]
        if np.any(gam > 1.0 / (2.0 * L * n)):
            flags.add("epoch step exceeds 1/(2*L*n)")
        lhs = (gam * n / 2.0) * (1.0 - gam * gam * L * L * n * n) * r
        rhs = ((1.0 + rr_consts.calA * L * L * n * n * gam**3) * delta[:-1]
               - delta[1:] + L * L * gam**3 * n * n * rr_consts.calB / 2.0)
        m = rhs - lhs
        margins = m[None, :] if margins is None else np.vstack([margins, m])
    mean = margins.mean(axis=0)
    se = margins.std(axis=0, ddof=1) / math.sqrt(margins.shape[0])
    bad = mean < -3.0 * se
    epochs = (ts0[:-1] // upe).astype(int)
    viol = tuple(int(epochs[i]) for i in np.nonzero(bad)[0])
    return AuditReport(viol, float(np.max(-mean)), len(mean), tuple(sorted(flags)))


# Constant estimation ------------------------------------------------------------


def estimate_f_star(objective, grad_tol: float = 1e-14, max_steps: int = 10**6,
                    x0=None) -> OptimumEstimate:
    """Estimate the minimum value by full-batch descent with step 1/L.

    Runs from x0 = 0 until ||grad F||^2 <= grad_tol or the step cap, then
    reports min observed loss minus the descent-lemma slack ||grad||^2/(2L).
    """
    L = smoothness_constant(objective).L
    gamma = 1.0 / L
    d = objective.dim
    x = np.zeros(d) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
    best = math.inf
    r = math.inf
    method = "gd"
    for _ in range(max_steps):
        value, g = loss_and_gradient(objective, x)
        best = min(best, value)
        r = float(g @ g)
        if r <= grad_tol:
            break
        x -= gamma * g
    else:
        method = "gd-cap-reached"
    return OptimumEstimate(best - r / (2.0 * L), method, math.sqrt(r))


def collect_probe_points(objective, seed: int = 7, n_trajectory: int = 100,
                         n_gauss: int = 100, pilot_steps: int = 3000):
    """Probe states for constant estimation: iterates of a short pilot
    SGD run (single-sample, step 1/(2L)) plus standard Gaussian points."""
    L = smoothness_constant(objective).L
    gamma = 0.5 / L
    n = objective.n
    d = objective.dim
    rng = SplitMix64(seed)
    x = np.zeros(d)
    probes = [x.copy()]
    keep_every = max(1, pilot_steps // max(1, n_trajectory - 1))
    for t in range(pilot_steps):
        i = rng.randbelow(n)
        x = x - gamma * per_sample_gradient(objective, x, i)
        if (t + 1) % keep_every == 0:
            probes.append(x.copy())
    probes = probes[:n_trajectory]
    for _ in range(n_gauss):
        probes.append(np.array([rng.gauss() for _ in range(d)]))
    return probes


def _probe_stats(objective, probe_points, f_star_value):
    eg2, delta, r = [], [], []
    for x in probe_points:
        value, g = loss_and_gradient(objective, x)
        eg2.append(stochastic_second_moment(objective, x))
        delta.append(value - f_star_value)
        r.append(float(g @ g))
    return np.array(eg2), np.array(delta), np.array(r)


def estimate_es_constants(objective, probe_points, f_star: OptimumEstimate,
                          reference=(1e-2, 0.2), safety: float = 0.05) -> ESConstants:
    """Fit feasible (A, B, C) on a probe set by grid search.

    For A in {0, L/2, L, 2L} and B in {0, 1, 2} the minimal feasible C is
    the max over probes of E||g||^2 - 2*A*delta - B*r (floored at 0).  If
    the gradient is deterministic (A=0, B=1 needs C ~ 0) that exact triple
    is returned.  Otherwise the A > 0 triple minimizing the tail-threshold
    iteration count at the reference (epsilon, eta) wins, and the returned
    C carries a relative safety margin so the triple stays feasible on
    fresh probe sets, not just this one.
    """
    if not probe_points:
        raise ValueError("probe set must not be empty")
    L = smoothness_constant(objective).L
    fs = f_star.f_star
    eg2, delta, r = _probe_stats(objective, probe_points, fs)
    scale = max(1.0, float(np.max(eg2)))
    det_c = float(np.max(eg2 - r))
    if det_c <= 1e-10 * scale:
        return ESConstants(0.0, 1.0, 0.0)
    delta0 = loss(objective, np.zeros(objective.dim)) - fs
    eps_ref, eta_ref = reference
    best = None
    for A in (L / 2.0, L, 2.0 * L):
        for B in (0.0, 1.0, 2.0):
            c_min = max(0.0, float(np.max(eg2 - 2.0 * A * delta - B * r)))
            score = iterations_for_tail_stationary(
                eps_ref, eta_ref, L, ESConstants(A, B, c_min), delta0
            ).T_real
            key = (score, A, B)
            if best is None or key < best[0]:
                best = (key, A, B, c_min)
    _, A, B, c_min = best
    return ESConstants(A, B, c_min * (1.0 + safety))


def certify_es_constants(objective, es: ESConstants, probe_points,
                         f_star: OptimumEstimate) -> float:
    """Max violation of E||g||^2 <= 2A*delta + B*r + C over the probes
    (nonpositive means feasible)."""
    eg2, delta, r = _probe_stats(objective, probe_points, f_star.f_star)
    return float(np.max(eg2 - 2.0 * es.A * delta - es.B * r - es.C))


def estimate_rr_constants(objective, probe_points, f_star: OptimumEstimate,
                          reference=(1e-2, 0.2), safety: float = 0.05) -> RRVarianceConstants:
    """Fit feasible (calA, calB) for the gradient-variance bound, mirroring
    the second-moment estimator: grid calA in {L/2, L, 2L}, minimal calB on
    the probes, scored by the reshuffling epoch threshold, safety-margined."""
    if not probe_points:
        raise ValueError("probe set must not be empty")
    L = smoothness_constant(objective).L
    fs = f_star.f_star
    eg2, delta, r = _probe_stats(objective, probe_points, fs)
    var = eg2 - r
    scale = max(1.0, float(np.max(eg2)))
    if float(np.max(var)) <= 1e-10 * scale:
        return RRVarianceConstants(0.0, 0.0)
    delta0 = loss(objective, np.zeros(objective.dim)) - fs
    eps_ref, eta_ref = reference
    n = objective.n
    best = None
    for calA in (L / 2.0, L, 2.0 * L):
        b_min = max(0.0, float(np.max(var - 2.0 * calA * delta)))
        score = epochs_for_tail_stationary_rr(
            eps_ref, eta_ref, L, n, RRVarianceConstants(calA, b_min), delta0
        ).T_real
        key = (score, calA)
        if best is None or key < best[0]:
            best = (key, calA, b_min)
    _, calA, b_min = best
    return RRVarianceConstants(calA, b_min * (1.0 + safety))


def certify_rr_constants(objective, consts: RRVarianceConstants, probe_points,
                         f_star: OptimumEstimate) -> float:
    eg2, delta, r = _probe_stats(objective, probe_points, f_star.f_star)
    return float(np.max((eg2 - r) - 2.0 * consts.calA * delta - consts.calB))
