"""Optimization loops and step-size schedules.

Four run modes share one segmented driver over the kernel backend:

* ``run_sgd``      -- iid sampling with replacement, one update per step.
* ``run_rr_sgd``   -- per-epoch uniform permutation, consecutive minibatch
                      blocks; ``config.T`` counts epochs and the trace t
                      axis counts inner updates (epoch boundaries always
                      logged).
* ``run_prox_sgd`` -- iid sampling, update x <- prox(h, gamma, x - gamma*g);
                      r_hat records the prox-gradient residual norm squared
                      with eta = gamma_t at the log point.
* ``run_full_gd``  -- deterministic full-batch gradient descent.

Every run starts at x0 = 0, draws all randomness from a SplitMix64 stream
seeded by the config, and emits a Trace that is byte-reproducible: same
(dataset, config) gives the identical CSV.  Sample indices are generated
in Python and handed to the kernel, so the float work is identical across
backends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .losses import CompositeObjective, L1Spec, SmoothNcxLogistic, SyntheticQuadratic, ZeroSpec
from .model import ESConstants, OptimumEstimate, RunConfig, Schedule, Trace, TracePoint
from .rng import SplitMix64

LN3 = math.log(3.0)

# Cap on len(idx) per kernel call; bounds transient memory for big batches.
SEGMENT_INDEX_BUDGET = 1 << 22


@dataclass(frozen=True)
class StepSizeContext:
    L: float
    es: ESConstants
    T: int


def schedule_gamma(schedule: Schedule, t: int) -> float:
    """Step value at iteration t (power kind uses t=1 for t=0)."""
    if schedule.kind == "constant":
        return schedule.gamma
    if schedule.kind == "inverse_sqrt":
        return schedule.gamma / math.sqrt(t + 1.0)
    # power: gamma * t^(-alpha)
    tt = t if t >= 1 else 1
    return schedule.gamma * float(tt) ** (-schedule.alpha)


def schedule_validity(schedule: Schedule, context: StepSizeContext) -> tuple:
    """Validity flags for a schedule against (L, ES constants, T).

    Returns warning strings; empty means no issue found.  Checks the
    step-size ceiling gamma_t <= 1/(L*B) over the horizon, and for the
    inverse-sqrt rule the stability requirement gamma0^2 < 1/(L*A*ln(T+1)).
    """
    flags = []
    L, es, T = context.L, context.es, context.T
    if es.B > 0:
        ceiling = 1.0 / (L * es.B)
        worst = max(schedule_gamma(schedule, t) for t in (0, 1))
        if worst > ceiling:
            flags.append(f"gamma exceeds 1/(L*B) = {ceiling:.6g}")
    if schedule.kind == "inverse_sqrt" and es.A > 0 and T >= 1:
        if schedule.gamma**2 >= 1.0 / (L * es.A * math.log(T + 1.0)):
            flags.append("gamma0^2 >= 1/(L*A*ln(T+1)); tail bound denominator flips sign")
    return tuple(flags)


def constant_step_for_horizon(T: int, L: float, A: float) -> float:
    """Constant step sqrt(ln 3 / ((T+1) L A)) keeping the compounding
    factor (1 + L A gamma^2)^(T+1) below 3."""
    if not (L > 0 and A > 0 and T >= 1):
        raise ValueError("need L > 0, A > 0, T >= 1")
    return math.sqrt(LN3 / ((T + 1.0) * L * A))


def rr_step_for_epochs(T_epochs: int, L: float, n: int, calA: float) -> float:
    """Epoch step (ln 3 / ((T+1) calA L^2 n^2))^(1/3) for reshuffled runs."""
    if not (L > 0 and calA > 0 and T_epochs >= 1 and n >= 1):
        raise ValueError("need L > 0, calA > 0, T >= 1, n >= 1")
    return (LN3 / ((T_epochs + 1.0) * calA * L * L * n * n)) ** (1.0 / 3.0)


def _objective_kernel_args(objective):
    """(kind, args) for the kernel backend; composite unwraps to its smooth part."""
    if isinstance(objective, CompositeObjective):
        return _objective_kernel_args(objective.smooth_part)
    if isinstance(objective, SmoothNcxLogistic):
        indptr, indices, data = objective.data.to_csr()
        return "ncx", (indptr, indices, data, objective.dim, objective.lam)
    if isinstance(objective, SyntheticQuadratic):
        return "quad", (objective.curvature, objective.dim)
    raise TypeError(f"cannot run on objective {objective!r}")


def _f_star_value(f_star_estimate):
    if isinstance(f_star_estimate, OptimumEstimate):
        return f_star_estimate.f_star
    return float(f_star_estimate)


def _run(objective, config: RunConfig, f_star_estimate, prox_tau: float) -> Trace:
    kind, args = _objective_kernel_args(objective)
    backend = _kernels.get_backend()
    n = objective.smooth_part.n if isinstance(objective, CompositeObjective) else objective.n
    d = args[-1] if kind == "quad" else args[3]
    f_star = _f_star_value(f_star_estimate)
    mode = config.mode
    sched = config.schedule
    full_batch = mode == "full_gd"
    want_mb = not full_batch
    b = config.batch_size
    if not full_batch and b > n:
        raise ValueError(f"batch_size {b} exceeds n = {n}")

    if mode == "rr_sgd":
        upe = (n + b - 1) // b  # updates per epoch
        total_steps = config.T * upe
    else:
        upe = 0
        total_steps = config.T

    rng = SplitMix64(config.seed)
    x = np.zeros(d)
    points = []
    diverged = False

    def log_t(t):
        if t % config.log_stride == 0:
            return True
        if mode == "rr_sgd" and t % upe == 0:
            return True
        return False

    def gamma_at(t):
        if mode == "rr_sgd":
            return schedule_gamma(sched, t // upe)
        return schedule_gamma(sched, t)

    # Index stream state: for rr, the in-progress permutation and cursor.
    perm = []
    cursor = 0
    epoch = 0

    seg_steps_cap = max(1, SEGMENT_INDEX_BUDGET // max(1, b if not full_batch else 1))
    t = 0
    while t < total_steps and not diverged:
        steps = min(seg_steps_cap, total_steps - t)
        gammas = np.empty(steps)
        flags = np.zeros(steps, dtype=np.uint8)
        for s in range(steps):
            gammas[s] = gamma_at(t + s)
            flags[s] = 1 if log_t(t + s) else 0
        if full_batch:
            idx = np.zeros(0, dtype=np.int64)
            off = np.zeros(steps + 1, dtype=np.int64)
        elif mode == "rr_sgd":
            flat = []
            off_list = [0]
            for s in range(steps):
                if cursor == 0:
                    perm = rng.permutation(n)
                    epoch += 1
                take = min(b, n - cursor)
                flat.extend(perm[cursor:cursor + take])
                cursor += take
                if cursor >= n:
                    cursor = 0
                off_list.append(len(flat))
            idx = np.asarray(flat, dtype=np.int64)
            off = np.asarray(off_list, dtype=np.int64)
        else:
            flat = [rng.randbelow(n) for _ in range(steps * b)]
            idx = np.asarray(flat, dtype=np.int64)
            off = np.arange(0, steps * b + 1, b, dtype=np.int64)

        max_logged = int(flags.sum())
        out_t = np.zeros(max_logged, dtype=np.int64)
        out_rhat = np.zeros(max_logged)
        out_loss = np.zeros(max_logged)
        out_mb = np.zeros(max_logged)
        out_gamma = np.zeros(max_logged)
        if kind == "ncx":
            indptr, indices, data, _, lam = args
            n_logged, status = backend.run_ncx_segment(
                indptr, indices, data, d, lam, x, full_batch, idx, off, gammas,
                flags, want_mb, prox_tau, t,
                out_t, out_rhat, out_loss, out_mb, out_gamma,
            )
        else:
            c, _ = args
            n_logged, status = backend.run_quad_segment(
                c, d, x, gammas, flags, want_mb, prox_tau, t,
                out_t, out_rhat, out_loss, out_mb, out_gamma,
            )
        for i in range(n_logged):
            mb = out_mb[i]
            points.append(
                TracePoint(
                    t=int(out_t[i]),
                    r_hat=float(out_rhat[i]),
                    delta_hat=float(out_loss[i]) - f_star,
                    gamma_t=float(out_gamma[i]),
                    loss=float(out_loss[i]),
                    minibatch_loss=None if math.isnan(mb) else float(mb),
                )
            )
        if status != 0:
            diverged = True
            break
        t += steps

    if not diverged:
        gamma_final = gamma_at(total_steps) if mode != "rr_sgd" else schedule_gamma(sched, config.T)
        if kind == "ncx":
            indptr, indices, data, _, lam = args
            loss_v, rhat = backend.eval_ncx(indptr, indices, data, d, lam, x, prox_tau, gamma_final)
        else:
            c, _ = args
            loss_v, rhat = backend.eval_quad(c, d, x, prox_tau, gamma_final)
        if math.isfinite(loss_v) and math.isfinite(rhat):
            points.append(
                TracePoint(
                    t=total_steps,
                    r_hat=float(rhat),
                    delta_hat=float(loss_v) - f_star,
                    gamma_t=float(gamma_final),
                    loss=float(loss_v),
                    minibatch_loss=None,
                )
            )
        else:
            diverged = True

    return Trace(config=config, points=tuple(points), final_iterate=x.copy(), diverged=diverged)


def run_sgd(objective, config: RunConfig, f_star_estimate) -> Trace:
    """iid SGD with replacement; minibatch gradient is the batch mean."""
    if config.mode != "iid_sgd":
        raise ValueError("run_sgd needs config.mode == 'iid_sgd'")
    return _run(objective, config, f_star_estimate, prox_tau=-1.0)


def run_rr_sgd(objective, config: RunConfig, f_star_estimate) -> Trace:
    """Reshuffled SGD; config.T counts epochs, step constant within each epoch."""
    if config.mode != "rr_sgd":
        raise ValueError("run_rr_sgd needs config.mode == 'rr_sgd'")
    return _run(objective, config, f_star_estimate, prox_tau=-1.0)


def run_prox_sgd(composite, config: RunConfig, f_star_estimate) -> Trace:
    """Proximal SGD on a composite objective.

    With h = 0 the prox is skipped entirely, so the trace is bit-identical
    to run_sgd under the same seed.
    """
    if config.mode != "prox_sgd":
        raise ValueError("run_prox_sgd needs config.mode == 'prox_sgd'")
    if not isinstance(composite, CompositeObjective):
        raise TypeError("run_prox_sgd needs a CompositeObjective")
    if isinstance(composite.h, ZeroSpec):
        tau = -1.0
    elif isinstance(composite.h, L1Spec):
        tau = composite.h.tau
    else:
        raise TypeError(f"unsupported regularizer {composite.h!r}")
    return _run(composite, config, f_star_estimate, prox_tau=tau)


def run_full_gd(objective, config: RunConfig, f_star_estimate) -> Trace:
    """Deterministic full-batch gradient descent."""
    if config.mode != "full_gd":
        raise ValueError("run_full_gd needs config.mode == 'full_gd'")
    return _run(objective, config, f_star_estimate, prox_tau=-1.0)
