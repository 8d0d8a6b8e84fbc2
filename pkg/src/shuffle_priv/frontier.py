"""Mechanism design under a pairwise chi-square budget.

One scalar, the budget ``C``, prices every mechanism; a second scalar, the
signal ``S``, determines the projected inverse-estimator risk
``(d-1)/(nd) (1/S - 1)``.  The optimal frontier ``S_opt(C)`` is the upper
concave envelope of the randomized-response curve: a straight thinning
segment up to the knee ``c_star(d)`` (augmented GRR at odds ``sqrt(d-1)``),
then the curve itself (calibrated GRR).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadParams,
    DTooSmall,
    NeutralOrbit,
    NoConvergence,
    ShufflePrivError,
    ZeroSignal,
)
from .mechanisms import MixtureSpec, OrbitTemplate

BISECT_MAX_ITER = 200
BISECT_RTOL = 1e-13


def grr_budget(d: int, lam: float) -> float:
    """Pairwise chi-square divergence of d-ary randomized response at odds ``lam``."""
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    if not lam > 1.0:
        raise BadParams(f"odds must exceed 1, got {lam!r}")
    return (lam - 1.0) ** 2 * (lam + 1.0) / (lam * (lam + d - 1.0))


def _solve_increasing(f, target: float, lo: float = 1.0 + 1e-9, hi: float = 2.0) -> float:
    """Bisection root of a strictly increasing f on (1, inf) with bracket doubling."""
    if not target > 0:
        raise BadParams(f"target must be positive, got {target!r}")
    doublings = 0
    while f(hi) < target:
        hi *= 2.0
        doublings += 1
        if doublings > 200:
            raise NoConvergence("could not bracket the root")
    for _ in range(BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(f(root) - target) > 1e-9 * max(target, 1.0):
        raise NoConvergence(f"residual {f(root) - target!r} after {BISECT_MAX_ITER} iterations")
    return root


def lambda_of_budget(d: int, budget: float) -> float:
    """Odds of the randomized-response channel whose budget equals ``budget``."""
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    return _solve_increasing(lambda lam: grr_budget(d, lam), budget)


def c_star(d: int) -> float:
    """Knee budget: the tangency point of the thinning segment on the GRR curve."""
    if d < 3:
        raise DTooSmall(f"the knee vanishes below d = 3, got d = {d}")
    return grr_budget(d, math.sqrt(d - 1.0))


def eta(d: int, lam: float) -> float:
    """Signal gain of one GRR block: (lam - 1) / (lam + d - 1)."""
    return (lam - 1.0) / (lam + d - 1.0)


@dataclass(frozen=True)
class SOptResult:
    """Value of the optimal signal frontier at one budget, with the attaining mechanism."""

    S: float
    mechanism: dict
    low_budget: bool


def s_opt(d: int, budget: float) -> SOptResult:
    """Largest signal coefficient achievable at the given budget.

    Low budget (below the knee): thinned aggressive GRR with
    ``p = budget / c_star(d)`` and odds ``sqrt(d-1)``.  High budget: calibrated
    plain GRR at the matching odds.
    """
    if not budget > 0:
        raise BadParams(f"budget must be positive, got {budget!r}")
    knee = c_star(d)
    if budget <= knee:
        S = budget / (d + 2.0 * math.sqrt(d - 1.0))
        mech = {
            "kind": "aug_grr",
            "d": d,
            "p": budget / knee,
            "lambda": math.sqrt(d - 1.0),
        }
        return SOptResult(S=S, mechanism=mech, low_budget=True)
    lam = lambda_of_budget(d, budget)
    return SOptResult(
        S=eta(d, lam) ** 2,
        mechanism={"kind": "grr", "d": d, "lambda": lam},
        low_budget=False,
    )


def projected_risk(S: float, d: int, n: int) -> float:
    """Exact fixed-composition risk of the projected inverse estimator at signal ``S``."""
    if not S > 0:
        raise ZeroSignal(f"signal must be positive, got {S!r}")
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    return (d - 1.0) / (n * d) * (1.0 / S - 1.0)


@dataclass(frozen=True)
class OptRiskResult:
    """Optimal-mechanism risk vs calibrated randomized response at one budget."""

    risk_opt: float
    risk_grr: float
    ratio: float
    lam_calibrated: float
    d: int
    n: int
    budget: float

    @property
    def n_risk_opt(self) -> float:
        return self.risk_opt * self.n

    @property
    def n_risk_grr(self) -> float:
        return self.risk_grr * self.n


def opt_risk(d: int, n: int, budget: float) -> OptRiskResult:
    """Compare the frontier-optimal risk with calibrated GRR at the same budget.

    Strictly below 1 for budgets under the knee; the two coincide above it.
    """
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    if not budget > 0:
        raise BadParams(f"budget must be positive, got {budget!r}")
    lam = lambda_of_budget(d, budget)
    knee = c_star(d)
    risk_grr = (d - 1.0) / (n * d) * ((d + lam + (d - 1.0) / lam) / budget - 1.0)
    if budget <= knee:
        risk_opt = (d - 1.0) / (n * d) * ((d + 2.0 * math.sqrt(d - 1.0)) / budget - 1.0)
    else:
        risk_opt = risk_grr
    return OptRiskResult(
        risk_opt=risk_opt,
        risk_grr=risk_grr,
        ratio=risk_opt / risk_grr,
        lam_calibrated=lam,
        d=d,
        n=n,
        budget=budget,
    )


def mixture_signal(spec: MixtureSpec) -> float:
    """Signal coefficient of a GRR mixture: sum of p_i eta_i^2 over blocks."""
    S = sum(p * eta(spec.d, lam) ** 2 for p, lam in spec.blocks)
    if not S > 0:
        raise ZeroSignal("mixture carries no signal")
    return S


def mixture_budget(spec: MixtureSpec) -> float:
    """Budget of a GRR mixture: sum of p_i C_(lam_i) over blocks."""
    return sum(p * grr_budget(spec.d, lam) for p, lam in spec.blocks)


def mixture_risk(spec: MixtureSpec, n: int) -> float:
    return projected_risk(mixture_signal(spec), spec.d, n)


@dataclass(frozen=True)
class ConcavityReport:
    """Sign certificate for the curvature of the signal-vs-budget curve."""

    p_value: float
    curvature: float
    in_certified_range: bool
    ok: bool


def concavity_certificate(d: int, lam: float) -> ConcavityReport:
    """Evaluate the curvature polynomial of the GRR curve at odds ``lam``.

    The polynomial is certified nonpositive for ``lam >= sqrt(d-1)``, which is
    exactly what makes the high-budget branch of the frontier the curve
    itself.  Below that range the sign is reported without any assertion.
    """
    if d < 2 or not lam > 1.0:
        raise BadParams(f"need d >= 2 and lam > 1, got d={d}, lam={lam!r}")
    P = (
        d**2 * lam
        + 2.0 * d**2
        - 3.0 * d * lam**3
        + d * lam
        - 4.0 * d
        - 2.0 * lam**4
        + 2.0 * lam**3
        - 2.0 * lam
        + 2.0
    )
    denom = 2.0 * d * lam**2 + d * lam + d + lam**3 - lam**2 + lam - 1.0
    curvature = 2.0 * d * lam**3 * P / ((lam - 1.0) * denom**3)
    in_range = lam >= math.sqrt(d - 1.0)
    ok = (not in_range) or P <= 1e-9 * max(abs(P), 1.0)
    return ConcavityReport(p_value=P, curvature=curvature, in_certified_range=in_range, ok=ok)


@dataclass(frozen=True)
class TwoLevelReport:
    """Signal, budget and signal-per-budget slope of a two-level template."""

    S: float
    C: float
    slope: float
    max_slope: float
    argmax_lam: float | None
    attained: bool


def two_level_slope(d: int, s: int, lam: float) -> TwoLevelReport:
    """Two-level (subset) template analysis at size ``s`` and odds ``lam``.

    For ``s < d/2`` the slope peaks at odds ``sqrt((d-s)/s)`` with value
    ``1/(d + 2 sqrt(s(d-s)))``; for ``s >= d/2`` the supremum ``1/(2d)`` sits
    on the boundary ``lam -> 1`` and is never attained.
    """
    if not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    if not lam > 1.0:
        raise BadParams(f"odds must exceed 1, got {lam!r}")
    g = d + s * (lam - 1.0)
    S = s * (d - s) * (lam - 1.0) ** 2 / ((d - 1.0) * g**2)
    C = s * (d - s) * (lam - 1.0) ** 2 * (lam + 1.0) / (lam * (d - 1.0) * g)
    slope = lam / ((lam + 1.0) * g)
    if s < d / 2.0:
        argmax = math.sqrt((d - s) / s)
        max_slope = 1.0 / (d + 2.0 * math.sqrt(s * (d - s)))
        attained = True
    else:
        argmax = None
        max_slope = 1.0 / (2.0 * d)
        attained = False
    return TwoLevelReport(
        S=S, C=C, slope=slope, max_slope=max_slope, argmax_lam=argmax, attained=attained
    )


def orbit_slope(template) -> float:
    """Signal-per-budget slope of a single orbit template: (B - d) / (AB - d^2).

    Bounded by ``1/(d + 2 sqrt(d-1))`` with equality only for the singleton
    GRR template at odds ``sqrt(d-1)``.
    """
    t = template if isinstance(template, OrbitTemplate) else OrbitTemplate(1.0, np.asarray(template, dtype=float))
    d = t.d
    B = t.b_sum_squares
    A = t.a_sum_inverse
    if B - d <= 1e-15 * d:
        raise NeutralOrbit("template is (numerically) constant; it carries no signal")
    return (B - d) / (A * B - d * d)


def orbit_slope_bound(d: int) -> float:
    return 1.0 / (d + 2.0 * math.sqrt(d - 1.0))


def ss_budget(d: int, s: int, lam: float) -> float:
    """Pairwise chi-square divergence of subset selection at size ``s`` and odds ``lam``."""
    if not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    if not lam > 1.0:
        raise BadParams(f"odds must exceed 1, got {lam!r}")
    return (
        s * (d - s) * (lam - 1.0) ** 2 * (lam + 1.0)
        / (lam * (d - 1.0) * (lam * s + d - s))
    )


def ss_risk(d: int, s: int, lam: float, n: int) -> float:
    """Exact projected fixed-composition risk of subset selection."""
    if not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    if not lam > 1.0:
        raise BadParams(f"odds must exceed 1, got {lam!r}")
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    num = lam**2 * s * (s - 1.0) + 2.0 * lam * s * (d - s) + (d - s) * (d - s - 1.0)
    return (d - 1.0) / n * num / (s * (d - s) * (lam - 1.0) ** 2)


@dataclass(frozen=True)
class SubsetTableRow:
    s: int
    lam: float
    n_risk: float


def ss_matched_risk(d: int, budget: float, n: int) -> list[SubsetTableRow]:
    """Calibrate every subset size to the same budget and tabulate its risk.

    The matched risk strictly increases with the subset size; violation of
    that ordering signals a numerical problem and raises.
    """
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    if not budget > 0:
        raise BadParams(f"budget must be positive, got {budget!r}")
    rows = []
    for s in range(1, d):
        lam_s = _solve_increasing(lambda lam: ss_budget(d, s, lam), budget)
        rows.append(SubsetTableRow(s=s, lam=lam_s, n_risk=ss_risk(d, s, lam_s, n) * n))
    for prev, cur in zip(rows, rows[1:]):
        if not cur.n_risk > prev.n_risk:
            raise ShufflePrivError(
                "subset-risk-monotonicity violated: "
                f"s={cur.s} risk {cur.n_risk!r} <= s={prev.s} risk {prev.n_risk!r}"
            )
    return rows


def thinned_ss_ratio(d: int, s: int, lam: float) -> float:
    """Signal-per-budget ratio of thinned subset selection; maximal at s=1, lam=sqrt(d-1)."""
    if not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    if not lam > 1.0:
        raise BadParams(f"odds must exceed 1, got {lam!r}")
    return lam / ((lam + 1.0) * (d + s * (lam - 1.0)))


@dataclass(frozen=True)
class FrontierPoint:
    """One point of the budget-signal frontier with its attaining mechanism."""

    C: float
    S: float
    n_risk_opt: float
    n_risk_grr: float
    ratio: float
    mechanism: dict


def frontier_table(d: int, budgets) -> list[FrontierPoint]:
    """Evaluate the optimal frontier on a budget grid (risks reported as n * risk)."""
    points = []
    for C in budgets:
        so = s_opt(d, float(C))
        orr = opt_risk(d, 1, float(C))
        points.append(
            FrontierPoint(
                C=float(C),
                S=so.S,
                n_risk_opt=orr.n_risk_opt,
                n_risk_grr=orr.n_risk_grr,
                ratio=orr.ratio,
                mechanism=so.mechanism,
            )
        )
    return points
