"""Constructors for the named channel families.

Explicit families (randomized response, half-block, augmented/mixture
variants, subset selection, interpolation) materialize their kernel matrix.
Permutation-equivariant channels are also available implicitly through orbit
templates, whose budget and signal have closed forms that avoid building
factorially large alphabets; :func:`materialize_orbit_channel` is the
desk-scale bridge between the two representations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import Channel, _readonly, validate_channel
from .errors import (
    AlphabetTooLarge,
    BadParams,
    MassMismatch,
    OddD,
    ParseError,
    TemplateSumError,
    TooLarge,
)

SUBSET_ALPHABET_CAP = 2_000_000
ORBIT_MATERIALIZE_D_CAP = 6
ORBIT_MATERIALIZE_ALPHABET_CAP = 100_000
TEMPLATE_SUM_TOL = 1e-10
MASS_SUM_TOL = 1e-10


def _check_lambda(lam: float):
    if not lam > 1.0:
        raise BadParams(f"odds parameter must exceed 1, got {lam!r}")


def grr(d: int, lam: float) -> Channel:
    """Randomized response on ``d`` symbols: report the truth with odds ``lam``."""
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    _check_lambda(lam)
    beta = 1.0 / (lam + d - 1)
    rows = np.full((d, d), beta)
    np.fill_diagonal(rows, lam * beta)
    return validate_channel(d, [str(y) for y in range(d)], rows)


def half_block(d: int, lam: float) -> Channel:
    """Cyclic half-block channel: mass tilted by ``lam`` onto a rotating block of d/2 outputs.

    Opposite input pairs (x, x + d/2) see complementary blocks, which makes the
    pairwise divergence independent of ``d``.
    """
    if d < 2 or d % 2 != 0:
        raise OddD(f"need an even d >= 2, got {d}")
    _check_lambda(lam)
    hi = 2.0 * lam / (d * (1.0 + lam))
    lo = 2.0 / (d * (1.0 + lam))
    rows = np.full((d, d), lo)
    for x in range(d):
        for k in range(d // 2):
            rows[x, (x + k) % d] = hi
    return validate_channel(d, [str(y) for y in range(d)], rows)


def augmented_grr(d: int, p: float, lam: float) -> Channel:
    """Thinned randomized response: with probability ``p`` run GRR at ``lam``, else send a null symbol."""
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    if not 0.0 <= p <= 1.0:
        raise BadParams(f"mixing probability must lie in [0, 1], got {p!r}")
    _check_lambda(lam)
    beta = 1.0 / (lam + d - 1)
    rows = np.full((d, d + 1), p * beta)
    np.fill_diagonal(rows, p * lam * beta)
    rows[:, d] = 1.0 - p
    outputs = [str(y) for y in range(d)] + ["z"]
    return validate_channel(d, outputs, rows)


@dataclass(frozen=True)
class MixtureSpec:
    """Mixture of GRR blocks plus null symbols: blocks ``(p_i, lam_i)``, null masses ``r_z``."""

    d: int
    blocks: tuple[tuple[float, float], ...]
    null_masses: tuple[float, ...] = ()

    def __post_init__(self):
        if self.d < 2:
            raise BadParams(f"need d >= 2, got {self.d}")
        blocks = tuple((float(p), float(lam)) for p, lam in self.blocks)
        nulls = tuple(float(r) for r in self.null_masses)
        for p, lam in blocks:
            if not p > 0.0:
                raise BadParams(f"block mass must be positive, got {p!r}")
            _check_lambda(lam)
        if any(r < 0 for r in nulls):
            raise BadParams("null masses must be nonnegative")
        total = sum(p for p, _ in blocks) + sum(nulls)
        if abs(total - 1.0) > MASS_SUM_TOL:
            raise MassMismatch(f"block + null masses sum to {total!r}, not 1")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "null_masses", nulls)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)


def grr_mixture(spec: MixtureSpec) -> Channel:
    """Block-concatenated channel: one GRR copy of the alphabet per block, then null columns."""
    d = spec.d
    m = spec.n_blocks
    k = len(spec.null_masses)
    rows = np.zeros((d, m * d + k))
    outputs = []
    for i, (p, lam) in enumerate(spec.blocks):
        beta = 1.0 / (lam + d - 1)
        block = np.full((d, d), p * beta)
        np.fill_diagonal(block, p * lam * beta)
        rows[:, i * d : (i + 1) * d] = block
        outputs.extend(f"b{i}:{y}" for y in range(d))
    for z, r in enumerate(spec.null_masses):
        rows[:, m * d + z] = r
        outputs.append(f"z{z}")
    return validate_channel(d, outputs, rows)


def subset_selection(d: int, s: int, lam: float) -> Channel:
    """Report a random s-subset of symbols, tilted by ``lam`` toward subsets containing the input."""
    if d < 2 or not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    _check_lambda(lam)
    n_out = math.comb(d, s)
    if n_out > SUBSET_ALPHABET_CAP:
        raise AlphabetTooLarge(
            f"C({d},{s}) = {n_out} output subsets exceed the cap {SUBSET_ALPHABET_CAP}"
        )
    base = d / (n_out * (lam * s + d - s))
    rows = np.empty((d, n_out))
    outputs = []
    for j, subset in enumerate(itertools.combinations(range(d), s)):
        col = np.full(d, base)
        col[list(subset)] = lam * base
        rows[:, j] = col
        outputs.append("{" + ",".join(str(x) for x in subset) + "}")
    return validate_channel(d, outputs, rows)


def subset_inclusion_probs(d: int, s: int, lam: float) -> tuple[float, float]:
    """(p_s, r_s): probability the reported subset contains the true input / any other fixed symbol."""
    if d < 2 or not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    _check_lambda(lam)
    denom = d + s * (lam - 1.0)
    p_s = lam * s / denom
    r_s = s * (lam * (s - 1.0) + d - s) / ((d - 1.0) * denom)
    return p_s, r_s


def interpolated(d: int, m: int, theta: float, lam: float) -> Channel:
    """Half-block structure of size ``m`` carrying mass ``theta``, padded by a flat common block.

    Sweeping ``theta`` moves the pairwise divergence continuously between 0
    and the saturating half-block value.
    """
    if m < 2 or m % 2 != 0:
        raise BadParams(f"informative block size must be even and >= 2, got {m}")
    if m > d:
        raise BadParams(f"informative block size {m} exceeds d = {d}")
    if not 0.0 <= theta <= 1.0:
        raise BadParams(f"theta must lie in [0, 1], got {theta!r}")
    _check_lambda(lam)
    if m == d and theta < 1.0:
        raise BadParams("with no common block the informative mass must be 1")
    if theta == 0.0 and m == d:
        raise BadParams("theta = 0 requires a common block (m < d)")
    hi = theta * 2.0 * lam / (m * (1.0 + lam))
    lo = theta * 2.0 / (m * (1.0 + lam))
    common = (1.0 - theta) / (d - m) if m < d else 0.0
    rows = np.full((d, d), common)
    for x in range(d):
        xm = x % m
        for y in range(m):
            in_block = (y - xm) % m < m // 2
            rows[x, y] = hi if in_block else lo
    return validate_channel(d, [str(y) for y in range(d)], rows)


@dataclass(frozen=True)
class OrbitTemplate:
    """Row profile of one output orbit of a permutation-equivariant channel.

    ``template`` is a positive vector summing to ``d`` (coordinate x = odds of
    output relative to the orbit-average row); ``mass`` is the total output
    probability each row places on the orbit.  The scalars ``A = sum 1/a_x``
    and ``B = sum a_x^2`` determine budget and signal in closed form.
    """

    mass: float
    template: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.template, dtype=float)
        if a.ndim != 1 or a.size < 2:
            raise TemplateSumError("template must be a vector of length >= 2")
        if np.any(a <= 0):
            raise TemplateSumError("template coordinates must be strictly positive")
        if abs(float(a.sum()) - a.size) > TEMPLATE_SUM_TOL * a.size:
            raise TemplateSumError(
                f"template sums to {a.sum()!r}, expected d = {a.size}"
            )
        if not 0.0 <= self.mass <= 1.0:
            raise BadParams(f"orbit mass must lie in [0, 1], got {self.mass!r}")
        # canonical form: descending values
        a = np.sort(a)[::-1].copy()
        a.setflags(write=False)
        object.__setattr__(self, "template", a)

    @property
    def d(self) -> int:
        return self.template.size

    @property
    def a_sum_inverse(self) -> float:
        return float(np.sum(1.0 / self.template))

    @property
    def b_sum_squares(self) -> float:
        return float(np.sum(self.template**2))

    def orbit_size(self) -> int:
        """Number of distinct coordinate permutations (multinomial of value multiplicities)."""
        _, counts = np.unique(_group_values(self.template), return_counts=True)
        size = math.factorial(self.d)
        for c in counts:
            size //= math.factorial(int(c))
        return size


def _group_values(a: np.ndarray, rtol: float = 1e-9) -> np.ndarray:
    """Integer group ids for near-equal values (descending input assumed unsorted ok)."""
    order = np.argsort(a, kind="stable")
    ids = np.empty(a.size, dtype=int)
    gid = 0
    prev = None
    for idx in order:
        if prev is not None and a[idx] > prev * (1 + rtol):
            gid += 1
        ids[idx] = gid
        prev = a[idx]
    return ids


@dataclass(frozen=True)
class EquivariantChannel:
    """Implicit permutation-equivariant channel: orbit templates plus neutral mass."""

    d: int
    orbits: tuple[OrbitTemplate, ...]
    null_mass: float = 0.0

    def __post_init__(self):
        for o in self.orbits:
            if o.d != self.d:
                raise BadParams(
                    f"orbit template has d = {o.d}, channel has d = {self.d}"
                )
        total = sum(o.mass for o in self.orbits) + self.null_mass
        if self.null_mass < 0 or abs(total - 1.0) > MASS_SUM_TOL:
            raise MassMismatch(f"orbit + null masses sum to {total!r}, not 1")
        object.__setattr__(self, "orbits", tuple(self.orbits))

    def budget(self) -> float:
        """Pairwise chi-square divergence, identical for every input pair."""
        d = self.d
        return sum(
            o.mass * (o.a_sum_inverse * o.b_sum_squares - d * d) / (d * (d - 1))
            for o in self.orbits
        )

    def signal(self) -> float:
        """Signal coefficient of the projected inverse estimator."""
        d = self.d
        return sum(
            o.mass * (o.b_sum_squares - d) / (d * (d - 1)) for o in self.orbits
        )


def orbit_channel(d: int, orbits, null_mass: float = 0.0) -> EquivariantChannel:
    """Assemble an implicit equivariant channel from orbit templates."""
    obs = tuple(
        o if isinstance(o, OrbitTemplate) else OrbitTemplate(*o) for o in orbits
    )
    return EquivariantChannel(d=d, orbits=obs, null_mass=float(null_mass))


def materialize_orbit_channel(ec: EquivariantChannel) -> Channel:
    """Build the explicit matrix of an implicit equivariant channel (desk-scale only).

    Each orbit contributes one column per distinct permutation of its
    template; orbit sizes grow factorially, hence the hard caps.
    """
    if ec.d > ORBIT_MATERIALIZE_D_CAP:
        raise TooLarge(f"materialization capped at d <= {ORBIT_MATERIALIZE_D_CAP}")
    total_cols = sum(o.orbit_size() for o in ec.orbits) + (1 if ec.null_mass > 0 else 0)
    if total_cols > ORBIT_MATERIALIZE_ALPHABET_CAP:
        raise TooLarge(
            f"{total_cols} output symbols exceed the cap {ORBIT_MATERIALIZE_ALPHABET_CAP}"
        )
    d = ec.d
    cols: list[np.ndarray] = []
    outputs: list[str] = []
    for k, orb in enumerate(ec.orbits):
        # snap near-equal values to their group mean so permutations dedupe exactly
        ids = _group_values(orb.template)
        reps = {g: float(orb.template[ids == g].mean()) for g in np.unique(ids)}
        values = tuple(reps[g] for g in ids)
        m = orb.orbit_size()
        seen = set()
        j = 0
        for perm in itertools.permutations(values):
            if perm in seen:
                continue
            seen.add(perm)
            cols.append(orb.mass / m * np.array(perm))
            outputs.append(f"o{k}:{j}")
            j += 1
    if ec.null_mass > 0:
        cols.append(np.full(d, ec.null_mass))
        outputs.append("z")
    rows = np.column_stack(cols)
    return validate_channel(d, outputs, rows)


def grr_template(d: int, lam: float) -> OrbitTemplate:
    """Singleton template of the GRR orbit: one tilted coordinate, d-1 flat ones."""
    if d < 2:
        raise BadParams(f"need d >= 2, got {d}")
    _check_lambda(lam)
    a = np.full(d, d / (lam + d - 1))
    a[0] = d * lam / (lam + d - 1)
    return OrbitTemplate(mass=1.0, template=a)


def two_level_template(d: int, s: int, lam: float) -> OrbitTemplate:
    """Subset-selection template: value alpha on s coordinates, beta on the rest."""
    if not 1 <= s <= d - 1:
        raise BadParams(f"need 1 <= s <= d-1, got d={d}, s={s}")
    _check_lambda(lam)
    denom = d + s * (lam - 1.0)
    a = np.full(d, d / denom)
    a[:s] = d * lam / denom
    return OrbitTemplate(mass=1.0, template=a)


def build_channel(spec: dict) -> Channel:
    """Dispatch a mechanism spec dict (the CLI wire format) to its constructor."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ParseError("mechanism spec must be a dict with a 'kind' key")
    kind = spec["kind"]
    try:
        if kind == "grr":
            return grr(int(spec["d"]), float(spec["lambda"]))
        if kind == "half_block":
            return half_block(int(spec["d"]), float(spec["lambda"]))
        if kind == "aug_grr":
            return augmented_grr(int(spec["d"]), float(spec["p"]), float(spec["lambda"]))
        if kind == "mixture":
            ms = MixtureSpec(
                d=int(spec["d"]),
                blocks=tuple((float(p), float(l)) for p, l in spec["blocks"]),
                null_masses=tuple(float(r) for r in spec.get("null_masses", ())),
            )
            return grr_mixture(ms)
        if kind == "subset":
            return subset_selection(int(spec["d"]), int(spec["s"]), float(spec["lambda"]))
        if kind == "interp":
            return interpolated(
                int(spec["d"]), int(spec["m"]), float(spec["theta"]), float(spec["lambda"])
            )
        if kind == "orbit":
            ec = orbit_channel(
                int(spec["d"]),
                [
                    OrbitTemplate(float(t["mass"]), np.asarray(t["template"], dtype=float))
                    for t in spec["templates"]
                ],
                null_mass=float(spec.get("null_mass", 0.0)),
            )
            return materialize_orbit_channel(ec)
    except KeyError as exc:
        raise ParseError(f"mechanism spec {kind!r} is missing parameter {exc}") from exc
    raise ParseError(f"unknown mechanism kind {kind!r}")
