"""Privacy curves for the canonical neighboring experiment.

The experiment: all ``n`` users hold input ``a`` versus one user switched to
``b``; the observer sees the shuffled output histogram.  Its likelihood ratio
is a linear functional of the ratio-law level-set counts, so exact curves
reduce to enumerating multinomial compositions over the law's atoms.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln, ndtr

from .channel import Channel, LRLaw, chi_star_pair
from .errors import (
    BadEps,
    BadMu,
    BadParams,
    EnumerationTooLarge,
    ZeroInformation,
)
from .mechanisms import build_channel

COMPOSITION_GUARD = 50_000_000
COMPOSITION_CHUNK = 200_000

# Admissible absolute constant for the i.i.d. normal-approximation certificate.
# Kept in one place so every certificate in the library agrees.
BE_CONSTANT = 0.5600


@dataclass(frozen=True)
class PrivacyCurve:
    """Sampled map eps -> (delta_fwd, delta_rev) for a binary experiment.

    ``delta_fwd`` bounds how much the one-changed-user law can exceed
    ``e^eps`` times the null law over any event; ``delta_rev`` is the reverse
    direction.  Monte Carlo curves carry standard errors.
    """

    eps: np.ndarray
    delta_fwd: np.ndarray
    delta_rev: np.ndarray
    n: int
    provenance: str
    se_fwd: np.ndarray | None = field(default=None, repr=False)
    se_rev: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        eps = np.asarray(self.eps, dtype=float)
        fwd = np.clip(np.asarray(self.delta_fwd, dtype=float), 0.0, 1.0)
        rev = np.clip(np.asarray(self.delta_rev, dtype=float), 0.0, 1.0)
        if eps.shape != fwd.shape or eps.shape != rev.shape:
            raise BadParams("eps and delta arrays must be aligned")
        if np.any(eps < 0):
            raise BadParams("eps grid must be nonnegative")
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "delta_fwd", fwd)
        object.__setattr__(self, "delta_rev", rev)

    @property
    def delta_two_sided(self) -> np.ndarray:
        return np.maximum(self.delta_fwd, self.delta_rev)

    def rows(self):
        for i in range(self.eps.size):
            yield (
                float(self.eps[i]),
                float(self.delta_fwd[i]),
                float(self.delta_rev[i]),
                float(self.delta_two_sided[i]),
            )


def default_eps_grid(lam: float, points: int = 64) -> np.ndarray:
    """Geometric grid in e^eps - 1 over [1e-3, lam]; curvature concentrates near eps = 0."""
    if not lam > 0:
        raise BadParams(f"need a positive odds bound, got {lam!r}")
    return np.log1p(np.geomspace(1e-3, lam, points))


def _compositions(n: int, k: int, chunk: int = COMPOSITION_CHUNK):
    """Yield int arrays of shape (m, k): all compositions of n into k parts, chunked.

    Chunk size is a fixed constant so partial sums do not depend on who
    consumes the stream.
    """
    if k == 1:
        yield np.array([[n]], dtype=np.int64)
        return
    it = itertools.combinations(range(n + k - 1), k - 1)
    while True:
        block = list(itertools.islice(it, chunk))
        if not block:
            return
        bars = np.asarray(block, dtype=np.int64)
        m = bars.shape[0]
        counts = np.empty((m, k), dtype=np.int64)
        counts[:, 0] = bars[:, 0]
        if k > 2:
            counts[:, 1:-1] = np.diff(bars, axis=1) - 1
        counts[:, -1] = (n + k - 2) - bars[:, -1]
        yield counts


def _positive_part_sums(masses, lr_values, eps_grid):
    """delta_fwd/delta_rev contributions of a batch of likelihood-ratio values."""
    e_eps = np.exp(eps_grid)
    fwd = np.empty(eps_grid.size)
    rev = np.empty(eps_grid.size)
    for j, e in enumerate(e_eps):
        fwd[j] = float(masses @ np.clip(lr_values - e, 0.0, None))
        rev[j] = float(masses @ np.clip(1.0 - e * lr_values, 0.0, None))
    return fwd, rev


def privacy_curve_exact(law: LRLaw, n: int, eps_grid) -> PrivacyCurve:
    """Exact curve by streaming enumeration of quotient compositions.

    The level-set count vector is multinomial under the null, and the
    likelihood ratio of a composition ``m`` is ``(1/n) sum_j r_j m_j``; the
    curve is the positive-part average over all compositions.
    """
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    eps_grid = np.asarray(eps_grid, dtype=float)
    keep = law.masses > 0.0
    r = law.ratios[keep]
    p = law.masses[keep]
    k = r.size
    total = math.comb(n + k - 1, k - 1)
    if total > COMPOSITION_GUARD:
        raise EnumerationTooLarge(
            f"{total} compositions exceed the guard {COMPOSITION_GUARD}"
        )
    log_p = np.log(p)
    lg_n = gammaln(n + 1)
    fwd_parts: list[np.ndarray] = []
    rev_parts: list[np.ndarray] = []
    for counts in _compositions(n, k):
        logpmf = lg_n - gammaln(counts + 1).sum(axis=1) + counts @ log_p
        mass = np.exp(logpmf)
        lr = counts @ r / n
        f, v = _positive_part_sums(mass, lr, eps_grid)
        fwd_parts.append(f)
        rev_parts.append(v)
    fwd = np.array([math.fsum(part[j] for part in fwd_parts) for j in range(eps_grid.size)])
    rev = np.array([math.fsum(part[j] for part in rev_parts) for j in range(eps_grid.size)])
    return PrivacyCurve(eps_grid, fwd, rev, n=n, provenance="exact_enumeration")


def privacy_curve_two_atom(lam: float, n: int, eps_grid) -> PrivacyCurve:
    """Closed-form curve of the two-endpoint ratio law (binary randomized response).

    The informative count is binomial with success probability ``1/(1+lam)``
    and the likelihood ratio is affine in it.
    """
    if not lam > 1.0:
        raise BadParams(f"odds bound must exceed 1, got {lam!r}")
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    eps_grid = np.asarray(eps_grid, dtype=float)
    q = 1.0 / (1.0 + lam)
    ks = np.arange(n + 1)
    log_w = (
        gammaln(n + 1)
        - gammaln(ks + 1)
        - gammaln(n - ks + 1)
        + ks * math.log(q)
        + (n - ks) * math.log1p(-q)
    )
    w = np.exp(log_w)
    lr = 1.0 / lam + (ks / n) * (lam - 1.0 / lam)
    fwd, rev = _positive_part_sums(w, lr, eps_grid)
    return PrivacyCurve(eps_grid, fwd, rev, n=n, provenance="closed_form_binomial")


def gdp_curve(mu: float, eps) -> float | np.ndarray:
    """Privacy curve of the Gaussian mean-shift pair with parameter ``mu``."""
    if not mu > 0:
        raise BadMu(f"need mu > 0, got {mu!r}")
    eps_arr = np.asarray(eps, dtype=float)
    if np.any(eps_arr < 0):
        raise BadParams("eps must be nonnegative")
    val = ndtr(-eps_arr / mu + mu / 2.0) - np.exp(eps_arr) * ndtr(-eps_arr / mu - mu / 2.0)
    val = np.clip(val, 0.0, 1.0)
    return float(val) if np.isscalar(eps) or eps_arr.ndim == 0 else val


def gdp_scale(info: float, n: int) -> float:
    """Gaussian scale sqrt(I/n) matching a pairwise chi-square divergence ``I``."""
    if info < 0:
        raise BadParams(f"divergence must be nonnegative, got {info!r}")
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    return math.sqrt(info / n)


def dilution_bounds(i_star: float, n: int, eps: float) -> tuple[float, float]:
    """Fixed-eps upper bounds on (delta_fwd, delta_rev) from the worst pairwise divergence.

    Both shrink like 1/n, so families whose divergence vanishes yield
    asymptotically perfect fixed-eps shuffle privacy.
    """
    if not eps > 0:
        raise BadEps(f"need eps > 0, got {eps!r}")
    if i_star < 0 or n < 1:
        raise BadParams("need i_star >= 0 and n >= 1")
    fwd = i_star / (n * math.expm1(eps))
    rev = math.exp(eps) * i_star / (n * -math.expm1(-eps))
    return min(fwd, 1.0), min(rev, 1.0)


def be_certificate(lam: float, n: int, info: float) -> float:
    """Kolmogorov-distance certificate for the standardized score under the null."""
    if info <= 0:
        raise ZeroInformation(f"divergence must be positive, got {info!r}")
    if not lam > 1.0 or n < 1:
        raise BadParams("need lam > 1 and n >= 1")
    return BE_CONSTANT * (lam - 1.0) / math.sqrt(n * info)


@dataclass(frozen=True)
class FamilyDiagnostic:
    """Finite-d trend of the worst pairwise divergence; never a limit claim."""

    d_values: tuple[int, ...]
    i_star: tuple[float, ...]
    worst_pairs: tuple[tuple[int, int], ...]
    loglog_slope: float
    label: str = "finite-d diagnostic; no limit is claimed"

    def rows(self):
        return list(zip(self.d_values, self.i_star, self.worst_pairs))


def family_diagnostic(family, d_list) -> FamilyDiagnostic:
    """Tabulate the worst pairwise divergence of a channel family along ``d``.

    ``family`` is either a callable ``d -> Channel`` or a mechanism spec dict
    without its ``d`` entry.  The log-log least-squares slope summarizes the
    trend (about -1 for randomized response, about 0 for half-block).
    """
    if callable(family):
        builder: Callable[[int], Channel] = family
    elif isinstance(family, dict):
        builder = lambda d: build_channel({**family, "d": d})
    else:
        raise BadParams("family must be a callable or a mechanism spec dict")
    d_values = [int(d) for d in d_list]
    if len(d_values) < 2:
        raise BadParams("need at least two alphabet sizes for a trend")
    stars: list[float] = []
    pairs: list[tuple[int, int]] = []
    for d in d_values:
        ch = builder(d)
        star, pair = chi_star_pair(ch)
        stars.append(star)
        pairs.append(pair)
    if min(stars) > 0:
        slope = float(np.polyfit(np.log(d_values), np.log(stars), 1)[0])
    else:
        slope = float("nan")
    return FamilyDiagnostic(
        d_values=tuple(d_values),
        i_star=tuple(stars),
        worst_pairs=tuple(pairs),
        loglog_slope=slope,
    )
