"""Finite channels, their privacy level, and pairwise likelihood-ratio laws.

A channel is a row-stochastic matrix from ``d`` inputs to a finite labeled
output alphabet.  For a pair of inputs ``(a, b)`` the per-output odds
``w(y) = W(y|b) / W(y|a)`` induce a discrete law under row ``a`` (atoms =
level sets of ``w``); that law is the complete invariant of the shuffled
binary experiment and everything downstream consumes it.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadLambda,
    BadParams,
    InfiniteLDP,
    LengthMismatch,
    NegativeEntry,
    NonStochasticRow,
    SameInput,
)

ROW_SUM_TOL = 1e-9
RATIO_MERGE_RTOL = 1e-9
MASS_TOL = 1e-12
MEAN_ONE_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Channel:
    """Row-stochastic kernel with ``d`` inputs and a labeled output alphabet.

    Instances are immutable and safe to share across threads.  Construct
    through :func:`validate_channel` (or a mechanism constructor), never
    directly: validation removes dead output columns and rejects matrices
    whose odds ratios are unbounded.
    """

    d: int
    outputs: tuple[str, ...]
    rows: np.ndarray = field(repr=False)

    @property
    def n_outputs(self) -> int:
        return len(self.outputs)

    def to_json(self) -> str:
        return json.dumps(
            {"d": self.d, "outputs": list(self.outputs), "rows": self.rows.tolist()}
        )

    @staticmethod
    def from_json(text: str) -> "Channel":
        obj = json.loads(text)
        return validate_channel(obj["d"], obj["outputs"], obj["rows"])


@dataclass(frozen=True)
class Histogram:
    """Released shuffle transcript: per-output counts with total ``n``."""

    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.min(initial=0) < 0 or int(counts.sum()) != self.n:
            raise BadParams("histogram counts must be nonnegative and sum to n")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)


@dataclass(frozen=True)
class LRLaw:
    """Law of the pairwise likelihood ratio under the null row.

    ``ratios`` and ``masses`` are aligned, sorted by ascending ratio, with
    near-equal ratios merged; ``level_sets[j]`` lists the output indices on
    which atom ``j`` lives.  ``epsilon0`` bounds ``log(ratio)`` in absolute
    value.
    """

    ratios: np.ndarray
    masses: np.ndarray
    level_sets: tuple[tuple[int, ...], ...]
    epsilon0: float

    def __post_init__(self):
        r = np.asarray(self.ratios, dtype=float)
        p = np.asarray(self.masses, dtype=float)
        if r.shape != p.shape or r.ndim != 1 or r.size == 0:
            raise BadParams("ratios and masses must be aligned nonempty vectors")
        if np.any(r <= 0) or np.any(p < 0):
            raise BadParams("ratios must be positive, masses nonnegative")
        if abs(p.sum() - 1.0) > MASS_TOL:
            raise BadParams(f"atom masses sum to {p.sum()!r}, not 1")
        if abs(float(r @ p) - 1.0) > MEAN_ONE_TOL:
            raise BadParams("ratio law violates the mean-one identity")
        bound = math.exp(self.epsilon0) * (1 + 1e-9) + 1e-12
        if r.max() > bound or r.min() < 1.0 / bound:
            raise BadParams("ratio outside [exp(-eps0), exp(eps0)]")
        if np.any(np.diff(r) <= 0):
            raise BadParams("ratios must be strictly increasing (merged atoms)")
        object.__setattr__(self, "ratios", _readonly(r))
        object.__setattr__(self, "masses", _readonly(p))
        object.__setattr__(self, "level_sets", tuple(tuple(int(i) for i in s) for s in self.level_sets))

    @property
    def n_atoms(self) -> int:
        return self.ratios.size

    def chi2(self) -> float:
        """Variance of the ratio: sum p_j (r_j - 1)^2."""
        return float(self.masses @ (self.ratios - 1.0) ** 2)

    def to_json(self) -> str:
        atoms = [
            {"r": float(r), "p": float(p), "levels": list(levels)}
            for r, p, levels in zip(self.ratios, self.masses, self.level_sets)
        ]
        return json.dumps({"atoms": atoms, "eps0": self.epsilon0})

    @staticmethod
    def from_json(text: str) -> "LRLaw":
        obj = json.loads(text)
        atoms = obj["atoms"]
        ratios = [a["r"] for a in atoms]
        masses = [a["p"] for a in atoms]
        levels = [tuple(a.get("levels", ())) for a in atoms]
        eps0 = obj.get("eps0")
        return law_from_atoms(ratios, masses, level_sets=levels, epsilon0=eps0)

    @staticmethod
    def from_atoms(ratios, masses, epsilon0: float | None = None) -> "LRLaw":
        return law_from_atoms(ratios, masses, epsilon0=epsilon0)


def law_from_atoms(ratios, masses, level_sets=None, epsilon0: float | None = None) -> LRLaw:
    """Build a ratio law from raw atoms: sorts, merges near-equal ratios, validates."""
    r = np.asarray(ratios, dtype=float)
    p = np.asarray(masses, dtype=float)
    if r.shape != p.shape or r.ndim != 1:
        raise BadParams("ratios and masses must be aligned vectors")
    if level_sets is None:
        level_sets = [(int(i),) for i in range(r.size)]
    order = np.argsort(r, kind="stable")
    r, p = r[order], p[order]
    level_sets = [tuple(level_sets[i]) for i in order]

    merged_r: list[float] = []
    merged_p: list[float] = []
    merged_levels: list[tuple[int, ...]] = []
    for rj, pj, lv in zip(r, p, level_sets):
        if merged_r and rj <= merged_r[-1] * (1 + RATIO_MERGE_RTOL):
            # mass-weighted representative keeps the mean-one identity intact
            tot = merged_p[-1] + pj
            if tot > 0:
                merged_r[-1] = (merged_r[-1] * merged_p[-1] + rj * pj) / tot
            merged_p[-1] = tot
            merged_levels[-1] = merged_levels[-1] + lv
        else:
            merged_r.append(float(rj))
            merged_p.append(float(pj))
            merged_levels.append(lv)
    r = np.array(merged_r)
    p = np.array(merged_p)
    if epsilon0 is None:
        epsilon0 = float(max(math.log(r.max()), -math.log(r.min()), 0.0))
    return LRLaw(r, p, tuple(merged_levels), float(epsilon0))


def validate_channel(d: int, outputs, rows) -> Channel:
    """Validate a kernel matrix and return a :class:`Channel`.

    Columns of common zero mass are dropped.  A column on which some rows
    are zero and others are not means the odds ratio is unbounded; such
    matrices are rejected rather than represented.
    """
    if not isinstance(d, (int, np.integer)) or d < 2:
        raise BadParams(f"need an integer d >= 2, got {d!r}")
    mat = np.asarray(rows, dtype=float)
    outputs = tuple(str(o) for o in outputs)
    if mat.ndim != 2 or mat.shape != (d, len(outputs)):
        raise BadParams(f"rows must be {d} x {len(outputs)}, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise BadParams("rows contain non-finite entries")
    if mat.min() < 0:
        raise NegativeEntry(f"minimum entry {mat.min()!r} is negative")
    sums = mat.sum(axis=1)
    bad = np.abs(sums - 1.0) > ROW_SUM_TOL
    if bad.any():
        i = int(np.argmax(bad))
        raise NonStochasticRow(f"row {i} sums to {sums[i]!r}")
    mat = mat / sums[:, None]

    zero = mat == 0.0
    all_zero = zero.all(axis=0)
    mixed = zero.any(axis=0) & ~all_zero
    if mixed.any():
        y = int(np.argmax(mixed))
        raise InfiniteLDP(
            f"output {outputs[y]!r} has zero mass under some inputs only; "
            "the odds ratio is unbounded"
        )
    keep = ~all_zero
    mat = mat[:, keep]
    outputs = tuple(o for o, k in zip(outputs, keep) if k)
    if mat.shape[1] == 0:
        raise BadParams("all output columns are zero")
    return Channel(d=int(d), outputs=outputs, rows=_readonly(mat))


def ldp_parameter(ch: Channel) -> float:
    """Log of the worst per-output odds ratio between any two rows; >= 0."""
    col_max = ch.rows.max(axis=0)
    col_min = ch.rows.min(axis=0)
    return max(float(np.log(col_max / col_min).max()), 0.0)


def pairwise_chi2(ch: Channel, a: int, b: int) -> float:
    """Chi-square divergence of row ``b`` from row ``a``.

    Equals the variance of the pairwise likelihood ratio under row ``a``.
    """
    if a == b:
        raise SameInput(f"inputs must differ, got a = b = {a}")
    pa, pb = ch.rows[a], ch.rows[b]
    return float(np.sum((pb - pa) ** 2 / pa))


def chi2_matrix(ch: Channel) -> np.ndarray:
    """d x d matrix of pairwise divergences (row a -> column b), zero diagonal."""
    out = np.zeros((ch.d, ch.d))
    for a in range(ch.d):
        diff = ch.rows - ch.rows[a]
        out[a] = np.sum(diff * diff / ch.rows[a], axis=1)
    return out


def chi_star(ch: Channel) -> float:
    """Worst pairwise chi-square divergence over ordered pairs."""
    return float(chi2_matrix(ch).max())


def chi_star_pair(ch: Channel) -> tuple[float, tuple[int, int]]:
    """Worst divergence and one ordered pair attaining it."""
    m = chi2_matrix(ch)
    a, b = np.unravel_index(int(np.argmax(m)), m.shape)
    return float(m[a, b]), (int(a), int(b))


def lr_law(ch: Channel, a: int, b: int) -> LRLaw:
    """Law of ``W(y|b)/W(y|a)`` under row ``a``, with outputs grouped by ratio value."""
    if a == b:
        raise SameInput(f"inputs must differ, got a = b = {a}")
    w = ch.rows[b] / ch.rows[a]
    return law_from_atoms(
        w, ch.rows[a], level_sets=[(y,) for y in range(ch.n_outputs)],
        epsilon0=ldp_parameter(ch),
    )


def exact_lr(law: LRLaw, quotient_counts) -> float:
    """Likelihood ratio of a quotient count vector: (1/n) sum_j r_j m_j."""
    m = np.asarray(quotient_counts, dtype=float)
    if m.shape != law.ratios.shape:
        raise LengthMismatch(
            f"{m.size} counts for {law.n_atoms} atoms"
        )
    if np.any(m < 0):
        raise BadParams("counts must be nonnegative")
    n = float(m.sum())
    if n <= 0:
        raise BadParams("counts must sum to a positive n")
    return float(law.ratios @ m) / n


def universal_bound(lam: float) -> float:
    """Largest chi-square divergence compatible with odds bounded by ``lam``."""
    if not lam > 1.0:
        raise BadLambda(f"lambda must exceed 1, got {lam!r}")
    return (lam - 1.0) ** 2 / lam


@dataclass(frozen=True)
class ExtremalityReport:
    """Whether a ratio law is the two-endpoint extremizer, plus its gap to the bound."""

    extremal: bool
    chi2: float
    bound: float
    gap: float

    def __bool__(self) -> bool:
        return self.extremal


def is_extremal(law: LRLaw, lam: float, tol: float = 1e-9) -> ExtremalityReport:
    """Check for the unique divergence-maximizing law at odds bound ``lam``.

    Extremal means exactly two atoms at ``1/lam`` and ``lam`` carrying masses
    ``lam/(1+lam)`` and ``1/(1+lam)``.  The report carries the chi-square gap
    to ``(lam-1)^2/lam`` as a diagnostic.
    """
    bound = universal_bound(lam)
    chi2 = law.chi2()
    gap = bound - chi2
    if law.n_atoms != 2:
        return ExtremalityReport(False, chi2, bound, gap)
    r_lo, r_hi = law.ratios
    p_lo, p_hi = law.masses
    ok = (
        abs(r_lo - 1.0 / lam) <= tol * max(1.0, 1.0 / lam)
        and abs(r_hi - lam) <= tol * max(1.0, lam)
        and abs(p_lo - lam / (1.0 + lam)) <= tol
        and abs(p_hi - 1.0 / (1.0 + lam)) <= tol
    )
    return ExtremalityReport(bool(ok), chi2, bound, gap)
