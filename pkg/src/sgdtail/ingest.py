"""Dataset parsing, label folding, and the two sampling regimes.

LIBSVM text format: one example per line, `<label> <idx>:<val> <idx>:<val> ...`
with 1-based strictly increasing indices.  Labels are +1/-1 and get folded
into the rows (a_i := y_i * x_i) so the downstream loss needs no labels.

Sampling is either iid with replacement (the same index can repeat) or a
fresh uniform permutation per epoch for reshuffled runs.  Both draw from
:class:`sgdtail.rng.SplitMix64`, so a seed pins the byte-exact sequence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Dataset, SparseVector
from .rng import SplitMix64


class LibsvmParseError(ValueError):
    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


@dataclass(frozen=True)
class EpochPermutation:
    perm: tuple
    epoch: int

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise ValueError("perm must be a permutation of 0..n-1")


@dataclass(frozen=True)
class MinibatchSample:
    indices: tuple
    t: int


def parse_libsvm(source, dim_override=None):
    """Parse LIBSVM text into (raw_rows, dim).

    raw_rows is a list of (label, SparseVector); indices come out 0-based.
    dim is the max 1-based index seen, or dim_override if given (must be
    >= the max index).  Blank lines are skipped; explicit zero values are
    dropped so rows satisfy the no-stored-zeros invariant.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        text = source
    raw = []
    max_idx = 0  # 1-based
    pending = []  # (label, [(idx0, val), ...]) before dim is known
    seen_line = False
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        seen_line = True
        tokens = stripped.split()
        try:
            label = float(tokens[0])
        except ValueError:
            raise LibsvmParseError(f"bad label token {tokens[0]!r}", line_no)
        entries = []
        prev = 0
        for tok in tokens[1:]:
            parts = tok.split(":")
            if len(parts) != 2:
                raise LibsvmParseError(f"bad feature token {tok!r}", line_no)
            try:
                idx = int(parts[0])
                val = float(parts[1])
            except ValueError:
                raise LibsvmParseError(f"bad feature token {tok!r}", line_no)
            if idx < 1:
                raise LibsvmParseError(f"index {idx} is not 1-based", line_no)
            if idx <= prev:
                raise LibsvmParseError(
                    f"indices must be strictly increasing, got {idx} after {prev}", line_no
                )
            prev = idx
            if idx > max_idx:
                max_idx = idx
            if val != 0.0:
                entries.append((idx - 1, val))
        pending.append((label, entries))
    if not seen_line:
        raise LibsvmParseError("empty file")
    dim = max_idx
    if dim_override is not None:
        if dim_override < max_idx:
            raise LibsvmParseError(
                f"dim override {dim_override} is below the max index {max_idx}"
            )
        dim = dim_override
    raw_rows = [(label, SparseVector(tuple(entries), dim)) for label, entries in pending]
    return raw_rows, dim


def fold_labels(raw_rows, provenance=""):
    """Fold +-1 labels into the rows: stored row is y_i * x_i."""
    rows = []
    for label, vec in raw_rows:
        if label not in (1.0, -1.0):
            raise ValueError(f"label must be +1 or -1, got {label}")
        rows.append(vec if label == 1.0 else vec.scaled(-1.0))
    dim = raw_rows[0][1].dim
    return Dataset(tuple(rows), dim, provenance=provenance)


def load_dataset(path, dim_override=None) -> Dataset:
    with open(path, "r") as fh:
        raw, _ = parse_libsvm(fh, dim_override=dim_override)
    return fold_labels(raw, provenance=str(path))


def sample_iid(n, batch_size, rng: SplitMix64, t=0) -> MinibatchSample:
    """batch_size indices uniform on [0, n), drawn with replacement."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    return MinibatchSample(tuple(rng.randbelow(n) for _ in range(batch_size)), t)


def next_permutation(n, rng: SplitMix64, epoch=0) -> EpochPermutation:
    """Uniform random permutation of [0, n) (Fisher-Yates)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return EpochPermutation(tuple(rng.permutation(n)), epoch)


def serialize_libsvm(raw_rows) -> str:
    """Inverse of parse_libsvm for well-formed rows (labels kept as +-1)."""
    lines = []
    for label, vec in raw_rows:
        toks = ["+1" if label > 0 else "-1"]
        for i, v in vec.entries:
            toks.append(f"{i + 1}:{format(v, '.17g')}")
        lines.append(" ".join(toks))
    return "\n".join(lines) + "\n"


# Synthetic stand-in generation -------------------------------------------------

_GROUP_SIZES = (9, 8, 10, 16, 7, 14, 6, 5, 2, 9, 10, 8, 9, 10)  # sums to 123


def _synthetic_raw_rows(n, d, seed, separability, intercept):
    if d != sum(_GROUP_SIZES):
        raise ValueError(f"generator is wired for d={sum(_GROUP_SIZES)}")
    rng = SplitMix64(seed)
    w_true = [rng.gauss() for _ in range(d)]
    group_offsets = []
    off = 0
    for size in _GROUP_SIZES:
        group_offsets.append(off)
        off += size
    raw = []
    for r in range(n):
        entries = []
        for g, size in enumerate(_GROUP_SIZES):
            # P(slot k) proportional to 0.65^k within the group, so a few
            # features are common (realistic Gram spectrum).
            u = rng.uniform()
            total = (1.0 - 0.65**size) / (1.0 - 0.65)
            acc = 0.0
            k = size - 1
            p = 1.0 / total
            for cand in range(size):
                acc += p
                if u < acc:
                    k = cand
                    break
                p *= 0.65
            entries.append((group_offsets[g] + k, 1.0))
        if r == n - 1:
            # Pin the max feature index so dim == d without an override.
            old_j, _ = entries[-1]
            if old_j != d - 1:
                entries[-1] = (d - 1, 1.0)
        score = sum(w_true[j] for j, _ in entries)
        margin = separability * (score + intercept)
        p_pos = 1.0 / (1.0 + math.exp(-margin)) if abs(margin) < 700 else float(margin > 0)
        label = 1.0 if rng.uniform() < p_pos else -1.0
        raw.append((label, SparseVector(tuple(entries), d)))
    return raw


def synthetic_binary_dataset(n=1605, d=123, seed=20240, separability=2.5,
                             intercept=-0.9) -> Dataset:
    """Deterministic synthetic classifier data shaped like LIBSVM a1a.

    Rows are one-hot blocks (one active feature per group, skewed within
    each group); labels come from a logistic model on a hidden weight
    vector and get folded into the rows.  Used as the stand-in whenever
    the real a1a file is not on disk: same n, d, sparsity, +-1 labels.

    separability scales the hidden margins (larger = cleaner labels);
    intercept shifts the class balance toward the majority class.
    """
    raw = _synthetic_raw_rows(n, d, seed, separability, intercept)
    return fold_labels(raw, provenance=f"synthetic:binary:n={n},d={d},seed={seed}")


def synthetic_libsvm_text(n=1605, d=123, seed=20240, separability=2.5,
                          intercept=-0.9) -> str:
    """The stand-in rendered as LIBSVM text (label +-1, unfolded rows)."""
    return serialize_libsvm(_synthetic_raw_rows(n, d, seed, separability, intercept))
