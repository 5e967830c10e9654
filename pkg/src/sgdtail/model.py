"""Shared domain types: datasets, run configuration, traces, and constants.

All types are immutable after construction and safe to share read-only
across parallel workers.  Traces are the raw material for every metric:
one :class:`TracePoint` per logged iteration, holding the exact full
gradient norm squared ``r_hat``, the suboptimality proxy ``delta_hat``,
the step used, and loss values.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TRACE_HEADER = "t,r_hat,delta_hat,gamma_t,loss,minibatch_loss"

SCHEDULE_KINDS = ("constant", "inverse_sqrt", "power")
RUN_MODES = ("iid_sgd", "rr_sgd", "prox_sgd", "full_gd")


def _fmt(x: float) -> str:
    """Decimal text with 17 significant digits (round-trips float64 exactly)."""
    return format(x, ".17g")


@dataclass(frozen=True)
class SparseVector:
    """Sparse row with strictly increasing 0-based indices, no stored zeros."""

    entries: tuple  # ((index, value), ...)
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple((int(i), float(v)) for i, v in self.entries))
        prev = -1
        for i, v in self.entries:
            if i <= prev:
                raise ValueError(f"indices must be strictly increasing, got {i} after {prev}")
            if i >= self.dim:
                raise ValueError(f"index {i} out of range for dim {self.dim}")
            if v == 0.0:
                raise ValueError("explicit zeros must not be stored")
            prev = i

    def norm_sq(self) -> float:
        return sum(v * v for _, v in self.entries)

    def scaled(self, c: float) -> "SparseVector":
        return SparseVector(tuple((i, c * v) for i, v in self.entries), self.dim)


@dataclass(frozen=True)
class Dataset:
    """Finite-sum problem instance: n sparse rows of dimension d."""

    rows: tuple
    dim: int
    provenance: str = ""

    def __post_init__(self):
        if len(self.rows) < 1:
            raise ValueError("dataset needs at least one row")
        for r in self.rows:
            if r.dim != self.dim:
                raise ValueError("all rows must share the dataset dimension")

    @property
    def n(self) -> int:
        return len(self.rows)

    def to_csr(self):
        """CSR arrays (indptr int64, indices int64, data float64), cached."""
        cached = getattr(self, "_csr", None)
        if cached is None:
            indptr = np.zeros(self.n + 1, dtype=np.int64)
            idx, val = [], []
            for r, row in enumerate(self.rows):
                for i, v in row.entries:
                    idx.append(i)
                    val.append(v)
                indptr[r + 1] = len(idx)
            cached = (indptr, np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=np.float64))
            object.__setattr__(self, "_csr", cached)
        return cached

    def row_norms_sq(self) -> np.ndarray:
        cached = getattr(self, "_rn2", None)
        if cached is None:
            cached = np.array([r.norm_sq() for r in self.rows])
            object.__setattr__(self, "_rn2", cached)
        return cached


@dataclass(frozen=True)
class ESConstants:
    """Second-moment bound constants: E||g||^2 <= 2A(F-F*) + B||grad F||^2 + C."""

    A: float
    B: float
    C: float

    def __post_init__(self):
        if self.A < 0 or self.B < 0 or self.C < 0:
            raise ValueError("expected-smoothness constants must be nonnegative")


@dataclass(frozen=True)
class RRVarianceConstants:
    """Gradient-variance bound constants for reshuffled runs:
    (1/n) sum_i ||grad f_i - grad F||^2 <= 2*calA*(F-F*) + calB."""

    calA: float
    calB: float

    def __post_init__(self):
        if self.calA < 0 or self.calB < 0:
            raise ValueError("variance constants must be nonnegative")


@dataclass(frozen=True)
class SmoothnessInfo:
    L: float
    method: str  # analytic | power-iteration | user-supplied

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")


@dataclass(frozen=True)
class Schedule:
    """Step-size rule.

    kind=constant      gamma_t = gamma
    kind=inverse_sqrt  gamma_t = gamma / sqrt(t + 1)
    kind=power         gamma_t = gamma * t^(-alpha), alpha in (1/2, 1); t=0 uses t=1
    """

    kind: str
    gamma: float
    alpha: Optional[float] = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.kind == "power":
            if self.alpha is None or not (0.5 < self.alpha < 1.0):
                raise ValueError("power schedule needs alpha in (1/2, 1)")


@dataclass(frozen=True)
class RunConfig:
    T: int
    batch_size: int
    seed: int
    schedule: Schedule
    log_stride: int = 1
    mode: str = "iid_sgd"

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.log_stride < 1:
            raise ValueError("log_stride must be >= 1")
        if self.mode not in RUN_MODES:
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class TracePoint:
    t: int
    r_hat: float
    delta_hat: float
    gamma_t: float
    loss: float
    minibatch_loss: Optional[float] = None

    def __post_init__(self):
        if self.r_hat < 0:
            raise ValueError("r_hat must be nonnegative")
        if not self.gamma_t > 0:
            raise ValueError("gamma_t must be positive")


@dataclass(frozen=True)
class Trace:
    """One seeded run: ordered logged points plus the final iterate."""

    config: Optional[RunConfig]
    points: tuple
    final_iterate: Optional[np.ndarray] = None
    diverged: bool = False

    def __post_init__(self):
        ts = [p.t for p in self.points]
        if ts != sorted(ts) or len(set(ts)) != len(ts):
            raise ValueError("trace points must be strictly sorted by t")

    @property
    def horizon(self) -> int:
        return self.points[-1].t

    def t_array(self) -> np.ndarray:
        return np.array([p.t for p in self.points], dtype=np.int64)

    def r_hat_array(self) -> np.ndarray:
        return np.array([p.r_hat for p in self.points])

    def loss_array(self) -> np.ndarray:
        return np.array([p.loss for p in self.points])

    def delta_hat_array(self) -> np.ndarray:
        return np.array([p.delta_hat for p in self.points])

    def gamma_array(self) -> np.ndarray:
        return np.array([p.gamma_t for p in self.points])


@dataclass(frozen=True)
class OptimumEstimate:
    f_star: float
    method: str
    residual_grad_norm: float


def write_trace_csv(trace: Trace, path_or_buf) -> None:
    """Write the logged points; schema `t,r_hat,delta_hat,gamma_t,loss,minibatch_loss`."""
    lines = [TRACE_HEADER]
    for p in trace.points:
        mb = "" if p.minibatch_loss is None or math.isnan(p.minibatch_loss) else _fmt(p.minibatch_loss)
        lines.append(
            f"{p.t},{_fmt(p.r_hat)},{_fmt(p.delta_hat)},{_fmt(p.gamma_t)},{_fmt(p.loss)},{mb}"
        )
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", newline="") as fh:
            fh.write(text)


def read_trace_csv(path_or_buf) -> Trace:
    """Read a trace CSV back into a config-less Trace."""
    if hasattr(path_or_buf, "read"):
        text = path_or_buf.read()
    else:
        with open(path_or_buf, "r", newline="") as fh:
            text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != TRACE_HEADER:
        raise ValueError("not a trace CSV (missing or wrong header)")
    points = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != 6:
            raise ValueError(f"malformed trace row: {ln!r}")
        mb = None if cells[5] == "" else float(cells[5])
        points.append(
            TracePoint(
                t=int(cells[0]),
                r_hat=float(cells[1]),
                delta_hat=float(cells[2]),
                gamma_t=float(cells[3]),
                loss=float(cells[4]),
                minibatch_loss=mb,
            )
        )
    return Trace(config=None, points=tuple(points))


def trace_csv_bytes(trace: Trace) -> bytes:
    buf = io.StringIO()
    write_trace_csv(trace, buf)
    return buf.getvalue().encode()
