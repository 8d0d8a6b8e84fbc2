"""Seeded Monte Carlo for shuffled channels: sampling, estimators, validation.

Reproducibility contract: every replication draws from its own counter-based
stream keyed by ``(seed, replication index)``, and replication statistics are
merged with exact (order-independent) summation, so results are bit-identical
for any worker count or batch partition.
"""
from __future__ import annotations

import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .channel import Channel, Histogram, lr_law, pairwise_chi2
from .errors import (
    BadParams,
    DimensionMismatch,
    TooLarge,
    TooManyVertices,
    ZeroInformation,
    ZeroSignal,
)
from .frontier import projected_risk
from .mechanisms import MixtureSpec, subset_inclusion_probs
from .privacy import PrivacyCurve, _compositions

FULL_HISTOGRAM_GUARD = 1_000_000
DECODER_D_CAP = 10


def replication_rng(seed: int, rep: int) -> np.random.Generator:
    """Independent stream for one replication: disjoint counter block per index."""
    if seed < 0 or rep < 0:
        raise BadParams("seed and replication index must be nonnegative")
    return np.random.Generator(np.random.Philox(key=seed, counter=rep << 128))


def default_workers() -> int:
    """Worker cap from SHUFFLE_PRIV_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("SHUFFLE_PRIV_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Composition:
    """Deterministic per-input user counts (exactly counts[x] users hold input x)."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.min(initial=0) < 0:
            raise BadParams("composition counts must be a nonnegative vector")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def d(self) -> int:
        return self.counts.size

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def theta(self) -> np.ndarray:
        return self.counts / self.n


def uniformish_composition(d: int, n: int) -> Composition:
    """n users spread as evenly as integers allow: floor(n/d) each, remainder to the lowest indices."""
    if d < 1 or n < 1:
        raise BadParams("need d >= 1 and n >= 1")
    counts = np.full(d, n // d, dtype=np.int64)
    counts[: n % d] += 1
    return Composition(counts)


def sample_histogram(ch: Channel, comp: Composition, seed) -> Histogram:
    """Draw the shuffled output histogram: one multinomial per input row.

    ``seed`` may be an integer (stream 0 is used) or a Generator.
    """
    if comp.d != ch.d:
        raise DimensionMismatch(f"composition has d = {comp.d}, channel d = {ch.d}")
    rng = seed if isinstance(seed, np.random.Generator) else replication_rng(int(seed), 0)
    counts = np.zeros(ch.n_outputs, dtype=np.int64)
    for x in range(ch.d):
        c = int(comp.counts[x])
        if c > 0:
            counts += rng.multinomial(c, ch.rows[x])
    return Histogram(counts=counts, n=comp.n)


# --- estimators ---------------------------------------------------------------


@dataclass(frozen=True)
class EstimatorSpec:
    """Linear unbiased estimator matched to a channel layout.

    kind 'mixture_projected': per-block inverse over GRR copies of the alphabet;
    kind 'orbit_projected': score-vector inverse for any permutation-equivariant channel;
    kind 'ss_inverse': inclusion-count inverse for subset selection.

    ``scores`` maps output index -> length-d score vector; the estimate is
    ``1/d + (counts @ scores) / (n d S)``.  ``signal`` is the common signal
    coefficient S, so the closed-form risk is available for every kind.
    """

    kind: str
    d: int
    signal: float
    scores: np.ndarray = field(repr=False)

    def closed_form_risk(self, n: int) -> float:
        return projected_risk(self.signal, self.d, n)


def mixture_estimator(spec: MixtureSpec) -> EstimatorSpec:
    """Projected inverse estimator for a GRR-mixture channel (blocks then nulls)."""
    from .frontier import eta, mixture_signal

    d = spec.d
    S = mixture_signal(spec)
    # zero-mass null columns never materialize, so size by surviving symbols
    n_out = spec.n_blocks * d + sum(1 for r in spec.null_masses if r > 0)
    scores = np.zeros((n_out, d))
    for i, (_, lam) in enumerate(spec.blocks):
        e = eta(d, lam)
        for y in range(d):
            vec = np.full(d, -e / d)
            vec[y] += e
            scores[i * d + y] = d * vec  # = d * eta * (e_y - 1/d)
    return EstimatorSpec(kind="mixture_projected", d=d, signal=S, scores=scores)


def orbit_estimator(ch: Channel) -> EstimatorSpec:
    """Projected inverse estimator read off any permutation-equivariant channel.

    The score of output y is its centered odds profile ``W(y|.)/mu(y) - 1``;
    unbiasedness relies on equivariance of the channel.
    """
    mu = ch.rows.mean(axis=0)
    T = (ch.rows / mu).T - 1.0  # (|Y|, d)
    d = ch.d
    S = float(mu @ np.sum(T * T, axis=1)) / (d * (d - 1))
    if not S > 0:
        raise ZeroSignal("channel carries no signal (all rows equal)")
    return EstimatorSpec(kind="orbit_projected", d=d, signal=S, scores=T)


def ss_estimator(d: int, s: int, lam: float) -> EstimatorSpec:
    """Inclusion-count inverse estimator for subset selection (outputs in combination order).

    Implements ``theta_j = (C_j/n - r_s) / (p_s - r_s)`` on the coordinate
    inclusion counts ``C_j``, rewritten in centered-score form.
    """
    import itertools

    p_s, r_s = subset_inclusion_probs(d, s, lam)
    if not p_s > r_s:
        raise ZeroSignal("inclusion probabilities coincide; inversion impossible")
    n_out = math.comb(d, s)
    member = np.zeros((n_out, d))
    for j, subset in enumerate(itertools.combinations(range(d), s)):
        member[j, list(subset)] = 1.0
    gap = p_s - r_s
    g = d + s * (lam - 1.0)
    S = s * (d - s) * (lam - 1.0) ** 2 / ((d - 1.0) * g * g)  # two-level signal
    scores = (member - s / d) * (d * S / gap)
    return EstimatorSpec(kind="ss_inverse", d=d, signal=S, scores=scores)


def estimate(spec: EstimatorSpec, hist: Histogram, n: int) -> np.ndarray:
    """Apply a linear estimator to a histogram; the output always sums to 1."""
    if n < 1:
        raise BadParams(f"need n >= 1, got {n}")
    if hist.counts.size != spec.scores.shape[0]:
        raise DimensionMismatch(
            f"histogram has {hist.counts.size} outputs, estimator expects {spec.scores.shape[0]}"
        )
    return 1.0 / spec.d + (hist.counts @ spec.scores) / (n * spec.d * spec.signal)


# --- risk simulation ----------------------------------------------------------


@dataclass(frozen=True)
class SimResult:
    """Replication summary; identical seeds give bit-identical results."""

    mean_risk: float
    std_error: float
    replications: int
    seed: int
    wall_notes: str = ""
    coord_mean: np.ndarray | None = field(default=None, repr=False)
    coord_se: np.ndarray | None = field(default=None, repr=False)


def _run_replications(fn, reps: int, workers: int | None) -> np.ndarray:
    """Evaluate fn(rep) for rep in range(reps) into a dense array, optionally threaded."""
    first = np.asarray(fn(0), dtype=float)
    out = np.empty((reps,) + first.shape)
    out[0] = first
    workers = workers if workers is not None else default_workers()
    if workers <= 1 or reps <= 2:
        for rep in range(1, reps):
            out[rep] = fn(rep)
        return out
    def block(lo: int, hi: int):
        for rep in range(lo, hi):
            out[rep] = fn(rep)
    step = max(1, (reps - 1) // workers + 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(block, lo, min(lo + step, reps))
            for lo in range(1, reps, step)
        ]
        for f in futures:
            f.result()
    return out


def empirical_risk(
    ch: Channel,
    est: EstimatorSpec,
    comp: Composition,
    reps: int,
    seed: int,
    iid: bool = False,
    workers: int | None = None,
) -> SimResult:
    """Mean squared error of the estimator over seeded replications.

    Fixed-composition mode by default; ``iid=True`` redraws the composition
    multinomially from ``comp/n`` each replication (the sampling model of the
    minimax bounds).
    """
    if reps < 2:
        raise BadParams(f"need reps >= 2, got {reps}")
    if comp.d != ch.d:
        raise DimensionMismatch(f"composition has d = {comp.d}, channel d = {ch.d}")
    n = comp.n
    theta = comp.theta()
    t0 = time.perf_counter()

    def one(rep: int) -> np.ndarray:
        rng = replication_rng(seed, rep)
        c = Composition(rng.multinomial(n, theta)) if iid else comp
        hist = sample_histogram(ch, c, rng)
        th = estimate(est, hist, n)
        err = th - theta
        return np.concatenate(([err @ err], th))

    rows = _run_replications(one, reps, workers)
    risks = rows[:, 0]
    ests = rows[:, 1:]
    mean = math.fsum(risks) / reps
    var = math.fsum((r - mean) ** 2 for r in risks) / (reps - 1)
    coord_mean = ests.mean(axis=0)
    coord_se = ests.std(axis=0, ddof=1) / math.sqrt(reps)
    return SimResult(
        mean_risk=mean,
        std_error=math.sqrt(var / reps),
        replications=reps,
        seed=seed,
        wall_notes=f"{time.perf_counter() - t0:.2f}s",
        coord_mean=coord_mean,
        coord_se=coord_se,
    )


# --- score CLT ----------------------------------------------------------------


def _kolmogorov_to_normal(sample: np.ndarray) -> float:
    s = np.sort(sample)
    m = s.size
    cdf = ndtr(s)
    hi = np.max(np.arange(1, m + 1) / m - cdf)
    lo = np.max(cdf - np.arange(0, m) / m)
    return float(max(hi, lo))


@dataclass(frozen=True)
class ScoreSimResult:
    """Empirical normality check of the standardized likelihood-ratio score."""

    ks_null: float
    ks_alt: float
    alt_mean: float
    alt_mean_se: float
    shift: float
    info: float
    replications: int
    seed: int


def empirical_score(
    ch: Channel, a: int, b: int, n: int, reps: int, seed: int, workers: int | None = None
) -> ScoreSimResult:
    """Simulate the standardized score under both hypotheses of the canonical pair.

    Null: all users hold ``a``; the score should be asymptotically standard
    normal.  Alternative: one user switched to ``b``; the score acquires mean
    shift ``sqrt(I/n)``.
    """
    info = pairwise_chi2(ch, a, b)
    if info <= 0:
        raise ZeroInformation("rows a and b are identical")
    if reps < 2 or n < 1:
        raise BadParams("need reps >= 2 and n >= 1")
    w = ch.rows[b] / ch.rows[a]
    shift = math.sqrt(info / n)

    def null_one(rep: int) -> float:
        rng = replication_rng(seed, rep)
        counts = rng.multinomial(n, ch.rows[a])
        return (counts @ w / n - 1.0) / shift

    def alt_one(rep: int) -> float:
        rng = replication_rng(seed, reps + rep)
        counts = rng.multinomial(n - 1, ch.rows[a]) if n > 1 else 0.0
        counts = counts + rng.multinomial(1, ch.rows[b])
        return (counts @ w / n - 1.0) / shift

    s_null = _run_replications(null_one, reps, workers)
    s_alt = _run_replications(alt_one, reps, workers)
    alt_mean = float(s_alt.mean())
    return ScoreSimResult(
        ks_null=_kolmogorov_to_normal(s_null),
        ks_alt=_kolmogorov_to_normal(s_alt - shift),
        alt_mean=alt_mean,
        alt_mean_se=float(s_alt.std(ddof=1) / math.sqrt(reps)),
        shift=shift,
        info=info,
        replications=reps,
        seed=seed,
    )


def empirical_privacy_curve(
    ch: Channel, a: int, b: int, n: int, reps: int, eps_grid, seed: int
) -> PrivacyCurve:
    """Monte Carlo privacy curve from null-sampled likelihood ratios.

    Both one-sided deltas are null expectations of positive parts of the
    sampled ratio, so a single null simulation covers the whole curve.
    """
    info = pairwise_chi2(ch, a, b)
    if info <= 0:
        raise ZeroInformation("rows a and b are identical")
    eps_grid = np.asarray(eps_grid, dtype=float)
    w = ch.rows[b] / ch.rows[a]

    def one(rep: int) -> float:
        rng = replication_rng(seed, rep)
        return float(rng.multinomial(n, ch.rows[a]) @ w / n)

    lr = _run_replications(one, reps, None)
    e_eps = np.exp(eps_grid)
    fwd_samples = np.clip(lr[:, None] - e_eps[None, :], 0.0, None)
    rev_samples = np.clip(1.0 - e_eps[None, :] * lr[:, None], 0.0, None)
    return PrivacyCurve(
        eps=eps_grid,
        delta_fwd=fwd_samples.mean(axis=0),
        delta_rev=rev_samples.mean(axis=0),
        n=n,
        provenance="monte_carlo",
        se_fwd=fwd_samples.std(axis=0, ddof=1) / math.sqrt(reps),
        se_rev=rev_samples.std(axis=0, ddof=1) / math.sqrt(reps),
    )


# --- exhaustive oracle ----------------------------------------------------------


@dataclass(frozen=True)
class SufficiencyReport:
    """Agreement between the full-histogram curve and the quotient curve."""

    eps: np.ndarray
    max_abs_diff_fwd: float
    max_abs_diff_rev: float
    tolerance: float

    @property
    def equal(self) -> bool:
        return max(self.max_abs_diff_fwd, self.max_abs_diff_rev) <= self.tolerance


def sufficiency_oracle(
    ch: Channel, a: int, b: int, n: int, eps_grid=None, tolerance: float = 1e-12
) -> SufficiencyReport:
    """Check that compressing the histogram to ratio level sets loses nothing.

    The full-histogram curve is computed from first principles: the null law
    is multinomial, and the one-changed-user law conditions on the output of
    the distinguished user.  The quotient curve comes from the streaming
    enumerator.  The two must agree pointwise.
    """
    from .privacy import privacy_curve_exact

    if a == b:
        raise BadParams("inputs must differ")
    k = ch.n_outputs
    total = math.comb(n + k - 1, k - 1)
    if total > FULL_HISTOGRAM_GUARD:
        raise TooLarge(f"{total} histograms exceed the guard {FULL_HISTOGRAM_GUARD}")
    if eps_grid is None:
        from .channel import ldp_parameter
        from .privacy import default_eps_grid

        eps_grid = default_eps_grid(math.exp(ldp_parameter(ch)), 16)
    eps_grid = np.asarray(eps_grid, dtype=float)

    from scipy.special import gammaln

    pa, pb = ch.rows[a], ch.rows[b]
    log_pa = np.log(pa)
    fwd = np.zeros(eps_grid.size)
    rev = np.zeros(eps_grid.size)
    e_eps = np.exp(eps_grid)
    for hist in _compositions(n, k):
        logp = gammaln(n + 1) - gammaln(hist + 1).sum(axis=1) + hist @ log_pa
        p_mass = np.exp(logp)
        # law with one distinguished user drawing from row b
        q_mass = np.zeros(hist.shape[0])
        for z in range(k):
            has = hist[:, z] >= 1
            if not np.any(has):
                continue
            shifted = hist[has].copy()
            shifted[:, z] -= 1
            logq = (
                gammaln(n) - gammaln(shifted + 1).sum(axis=1) + shifted @ log_pa
            )
            q_mass[has] += pb[z] * np.exp(logq)
        for j, e in enumerate(e_eps):
            fwd[j] += float(np.sum(np.clip(q_mass - e * p_mass, 0.0, None)))
            rev[j] += float(np.sum(np.clip(p_mass - e * q_mass, 0.0, None)))

    quotient = privacy_curve_exact(lr_law(ch, a, b), n, eps_grid)
    return SufficiencyReport(
        eps=eps_grid,
        max_abs_diff_fwd=float(np.max(np.abs(fwd - quotient.delta_fwd))),
        max_abs_diff_rev=float(np.max(np.abs(rev - quotient.delta_rev))),
        tolerance=tolerance,
    )


# --- testing-bound simulation ---------------------------------------------------


@dataclass(frozen=True)
class AssouadSimResult:
    """Worst-vertex empirical risk over the hypercube, with the analytic floor."""

    worst_risk: float
    worst_vertex: int
    per_vertex_risk: np.ndarray
    per_vertex_se: np.ndarray
    bound: float
    delta: float
    decoder_error_rate: float
    replications: int
    seed: int


def assouad_decoder_sim(
    ch: Channel,
    n: int,
    delta_cube: float | None,
    reps: int,
    seed: int,
    est: EstimatorSpec | None = None,
) -> AssouadSimResult:
    """Empirical risk of the projected estimator at every hypercube vertex (i.i.d. model).

    Sanity check for the testing lower bound: the worst empirical risk must
    sit above the analytic floor.  Also runs the threshold coordinate decoder
    at 3 delta / 2 and reports its error rate.
    """
    from .bounds import assouad_bound, assouad_cube

    if ch.d > DECODER_D_CAP:
        raise TooManyVertices(f"decoder simulation capped at d <= {DECODER_D_CAP}")
    if reps < 2:
        raise BadParams(f"need reps >= 2, got {reps}")
    report = assouad_bound(ch, n, delta_cube)
    delta = report.delta
    vertices = assouad_cube(ch.d, delta)
    est = est if est is not None else orbit_estimator(ch)
    n_vertices = vertices.shape[0]
    risks = np.empty((n_vertices, reps))
    decoder_errors = 0
    total_bits = 0
    for v in range(n_vertices):
        theta_v = vertices[v]
        bits = (np.abs(theta_v[1:] - 2.0 * delta) < 1e-12).astype(int)
        for rep in range(reps):
            rng = replication_rng(seed, v * reps + rep)
            comp = Composition(rng.multinomial(n, theta_v))
            hist = sample_histogram(ch, comp, rng)
            th = estimate(est, hist, n)
            err = th - theta_v
            risks[v, rep] = err @ err
            guess = (th[1:] >= 1.5 * delta).astype(int)
            decoder_errors += int(np.sum(guess != bits))
            total_bits += bits.size
    per_vertex = risks.mean(axis=1)
    per_se = risks.std(axis=1, ddof=1) / math.sqrt(reps)
    worst = int(np.argmax(per_vertex))
    return AssouadSimResult(
        worst_risk=float(per_vertex[worst]),
        worst_vertex=worst,
        per_vertex_risk=per_vertex,
        per_vertex_se=per_se,
        bound=report.bound,
        delta=delta,
        decoder_error_rate=decoder_errors / max(total_bits, 1),
        replications=reps,
        seed=seed,
    )
