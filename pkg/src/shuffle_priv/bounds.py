"""Fisher information on the simplex tangent space and minimax lower bounds.

All bounds are driven by the worst pairwise chi-square divergence of the
channel: it caps the Fisher quadratic form in every vertex direction and the
testing affinity between hypercube vertices, so no estimator can beat order
``(d-1)/(n * chi_star)`` once ``n * chi_star`` dominates ``d^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Channel, chi_star
from .errors import (
    BadDelta,
    BadParams,
    DegenerateMixture,
    SimplexViolation,
    SingularFisher,
    TooManyVertices,
    ZeroInformation,
)

SINGULAR_EIGENVALUE_RTOL = 1e-12
CUBE_D_CAP = 16


def tangent_basis(d: int) -> np.ndarray:
    """Orthonormal d x (d-1) basis of the zero-sum tangent space."""
    H = np.zeros((d, d - 1))
    for k in range(1, d):
        H[:k, k - 1] = 1.0
        H[k, k - 1] = -float(k)
        H[:, k - 1] /= math.sqrt(k * (k + 1))
    return H


def _check_simplex(theta, d: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (d,):
        raise SimplexViolation(f"point has shape {theta.shape}, expected ({d},)")
    if np.any(theta < -1e-12) or abs(float(theta.sum()) - 1.0) > 1e-9:
        raise SimplexViolation(f"point {theta!r} is not in the simplex")
    return np.clip(theta, 0.0, None)


@dataclass(frozen=True)
class FisherInfo:
    """Fisher information matrix restricted to the zero-sum tangent space."""

    matrix: np.ndarray = field(repr=False)
    n: int
    theta: np.ndarray = field(repr=False)

    def tangent_eigenvalues(self) -> np.ndarray:
        """Spectrum on the tangent space (ascending), via an explicit orthonormal basis."""
        d = self.matrix.shape[0]
        H = tangent_basis(d)
        return np.linalg.eigvalsh(H.T @ self.matrix @ H)

    def tangent_trace(self) -> float:
        return float(np.sum(self.tangent_eigenvalues()))

    def tangent_inverse_trace(self) -> float:
        """Trace of the inverse on the tangent space; raises when singular."""
        eig = self.tangent_eigenvalues()
        if eig.min() <= SINGULAR_EIGENVALUE_RTOL * max(eig.max(), 1e-300):
            raise SingularFisher(
                "Fisher information is singular on the tangent space; "
                "the lower bound is vacuous"
            )
        return float(np.sum(1.0 / eig))


def fisher_info(ch: Channel, theta, n: int) -> FisherInfo:
    """Fisher information of the output mixture at ``theta``, projected to the tangent space."""
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    theta = _check_simplex(theta, ch.d)
    q = theta @ ch.rows
    if q.min() <= 0.0:
        raise DegenerateMixture("output mixture has a zero-mass symbol")
    W = ch.rows
    core = W @ (W / q).T  # (d x d): sum_y W(y|x) W(y|x') / q(y)
    d = ch.d
    P = np.eye(d) - np.full((d, d), 1.0 / d)
    M = n * (P @ core @ P)
    M = 0.5 * (M + M.T)
    return FisherInfo(matrix=M, n=n, theta=theta)


def near_vertex_point(d: int, rho: float) -> np.ndarray:
    """The spiked simplex point (1 - (d-1) rho, rho, ..., rho)."""
    if not 0.0 < rho < 1.0 / (d - 1):
        raise BadParams(f"need 0 < rho < 1/(d-1), got {rho!r}")
    theta = np.full(d, rho)
    theta[0] = 1.0 - (d - 1) * rho
    return theta


@dataclass(frozen=True)
class CrBoundReport:
    """Near-vertex information bound: closed form plus the sharper trace form."""

    formula: float
    trace: float
    chi_star: float
    rho: float
    n: int


def cr_bound(ch: Channel, n: int, rho: float) -> CrBoundReport:
    """Lower bound on the risk of locally unbiased estimators near a simplex vertex.

    ``formula`` is the closed form ``(d-1)(1-(d-1)rho) / (n chi_star)``;
    ``trace`` is the exact inverse-trace of the Fisher information at the
    spiked point, which is never smaller.
    """
    d = ch.d
    theta = near_vertex_point(d, rho)
    star = chi_star(ch)
    if star <= 0:
        raise ZeroInformation("channel has identical rows; no estimation is possible")
    formula = (d - 1) * (1.0 - (d - 1) * rho) / (n * star)
    fi = fisher_info(ch, theta, n)
    trace = fi.tangent_inverse_trace()
    return CrBoundReport(formula=formula, trace=trace, chi_star=star, rho=rho, n=n)


def assouad_cube(d: int, delta: float) -> np.ndarray:
    """All 2^(d-1) spiked simplex points theta^v with coordinates delta*(1+v_j).

    Neighboring vertices differ by ``delta`` along ``e_j - e_1``.
    """
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    if d > CUBE_D_CAP:
        raise TooManyVertices(f"2^{d - 1} vertices exceed the cap (d <= {CUBE_D_CAP})")
    if not 0.0 < delta <= 1.0 / (4 * (d - 1)):
        raise BadDelta(f"need 0 < delta <= 1/(4(d-1)), got {delta!r}")
    m = d - 1
    vertices = np.empty((2**m, d))
    for i in range(2**m):
        v = np.array([(i >> j) & 1 for j in range(m)], dtype=float)
        vertices[i, 1:] = delta * (1.0 + v)
        vertices[i, 0] = 1.0 - vertices[i, 1:].sum()
    return vertices


@dataclass(frozen=True)
class AssouadReport:
    """Hypercube testing bound for arbitrary estimators."""

    bound: float
    delta: float
    regime_ok: bool
    chi_star: float
    n: int
    vacuous: bool


def assouad_bound(ch: Channel, n: int, delta_cube: float | None = None) -> AssouadReport:
    """Minimax lower bound from the hypercube of spiked simplex points.

    With the canonical half-width ``1/(2 sqrt(n chi_star))`` the bound is
    ``(d-1) / (64 n chi_star)``, valid when ``n chi_star >= 4 (d-1)^2``.
    Outside that regime (or with an explicit ``delta_cube``) the general
    ``(d-1)/8 * delta^2 (1 - delta sqrt(n chi_star))`` value is returned,
    flagged accordingly.
    """
    d = ch.d
    star = chi_star(ch)
    if star <= 0:
        raise ZeroInformation("channel has identical rows; no estimation is possible")
    if not math.isfinite(star):
        raise BadParams("divergence must be finite")
    dmax = 1.0 / (4 * (d - 1))
    root = math.sqrt(n * star)
    regime_ok = n * star >= 4.0 * (d - 1) ** 2  # canonical half-width is feasible
    if delta_cube is not None:
        if not 0.0 < delta_cube <= dmax:
            raise BadDelta(f"need 0 < delta <= {dmax}, got {delta_cube!r}")
        delta = delta_cube
    else:
        delta = 1.0 / (2.0 * root) if regime_ok else dmax
    bound = (d - 1) / 8.0 * delta**2 * (1.0 - delta * root)
    return AssouadReport(
        bound=bound,
        delta=delta,
        regime_ok=bool(regime_ok),
        chi_star=star,
        n=n,
        vacuous=bool(bound <= 0.0),
    )


def symmetrized_chi2(ch: Channel) -> float:
    """Budget of the input-permutation average: the mean over ordered pairs.

    Never exceeds the worst pair, so symmetrizing a channel stays feasible
    under any budget cap.
    """
    d = ch.d
    total = 0.0
    for a in range(d):
        diff = ch.rows - ch.rows[a]
        total += float(np.sum(diff * diff / ch.rows[a]))
    return total / (d * (d - 1))


@dataclass(frozen=True)
class SymmetrizedFisherReport:
    """Uniform-point Fisher comparison between a channel and its permutation average."""

    alpha: float
    inverse_trace_symmetrized: float
    inverse_trace_original: float


def symmetrized_fisher_uniform(ch: Channel, n: int) -> SymmetrizedFisherReport:
    """Equalized Fisher eigenvalue of the permutation average, and both inverse traces.

    The average acts as ``alpha`` times the identity on the tangent space with
    ``alpha = trace / (d-1)``; by the arithmetic-harmonic mean inequality its
    inverse trace can only improve on the original channel's.
    """
    d = ch.d
    fi = fisher_info(ch, np.full(d, 1.0 / d), n)
    inv_orig = fi.tangent_inverse_trace()
    tr = fi.tangent_trace()
    alpha = tr / (d - 1)
    inv_sym = (d - 1) ** 2 / tr
    return SymmetrizedFisherReport(
        alpha=alpha,
        inverse_trace_symmetrized=inv_sym,
        inverse_trace_original=inv_orig,
    )
