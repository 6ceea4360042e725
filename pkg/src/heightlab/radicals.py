"""Radical scalars, radical projective points, and their exact heights.

A radical scalar is the positive real number  prod_p p^{e_p}  with
finitely many nonzero rational exponents e_p (positive real branch of
every root).  Its height, the heights of projective points with radical
coordinates, and the degrees of the generated fields all admit exact
computations:

* height(prod p^{e_p}) = sum_{e_l < 0} (-e_l) log l
                         + max(0, sum_p e_p log p),
  a rational combination of logs of primes (the max is decided by a
  certified sign computation);

* [Q(a_1,...,a_k) : Q] is the index [G : Z^S] where G is the subgroup
  of Q^S generated by Z^S and the exponent vectors, computed exactly
  through the Smith normal form of the stacked, denominator-cleared
  generator matrix.

The chain checker certifies the two-step comparison

  [K:Q]^g h(P)  >=  (prod_{i in I} d_i^g) (prod_{i in I} h(a_i))^{1/#I}
                >=  (prod_{i in I} h_{Ng}(a_i))^{1/#I}

for g < 0, I the coordinates of nonzero weighted height: the second
step is settled by exact rational sign arithmetic, the first by exact
detection of the (complete) equality pattern plus escalating interval
separation otherwise.  A genuine violation raises; it is never reported
as a result.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import lcm

from mpmath import iv, mpf, workdps

from .heights import (
    EQUAL,
    GREATER,
    INCONCLUSIVE,
    LESS,
    HeightValue,
    LogCombination,
    _iv_dps,
    _iv_fraction,
)
from .numcore import (
    DEFAULT_DIGITS,
    BigFloat,
    IntMatrix,
    PrecisionError,
    factorint,
    is_prime,
    smith_normal_form,
)


class RadicalScalar:
    """prod_p p^{exponents[p]} with rational exponents; always the
    positive real value.  Canonical: zero exponents dropped, primes
    validated and sorted."""

    __slots__ = ("exponents",)

    def __init__(self, exponents=None):
        ex = {}
        for p, e in (exponents or {}).items():
            e = Fraction(e)
            if e == 0:
                continue
            p = int(p)
            if not is_prime(p):
                raise ValueError(f"{p} is not prime")
            ex[p] = e
        self.exponents = dict(sorted(ex.items()))

    @staticmethod
    def one() -> "RadicalScalar":
        return RadicalScalar()

    @staticmethod
    def from_rational(q) -> "RadicalScalar":
        q = Fraction(q)
        if q <= 0:
            raise ValueError("radical scalars are positive")
        ex: dict[int, Fraction] = {}
        for p, e in factorint(q.numerator).items():
            ex[p] = ex.get(p, Fraction(0)) + e
        for p, e in factorint(q.denominator).items():
            ex[p] = ex.get(p, Fraction(0)) - e
        return RadicalScalar(ex)

    def is_one(self) -> bool:
        return not self.exponents

    def __mul__(self, other: "RadicalScalar") -> "RadicalScalar":
        ex = dict(self.exponents)
        for p, e in other.exponents.items():
            ex[p] = ex.get(p, Fraction(0)) + e
        return RadicalScalar(ex)

    def __truediv__(self, other: "RadicalScalar") -> "RadicalScalar":
        return self * other.pow(-1)

    def pow(self, k) -> "RadicalScalar":
        k = Fraction(k)
        return RadicalScalar({p: e * k for p, e in self.exponents.items()})

    def log_value(self) -> LogCombination:
        """log of the scalar, as an exact combination."""
        return LogCombination(self.exponents)

    def value_interval(self, dps: int):
        # endpoints extracted at matching mp precision (see
        # LogCombination.interval)
        with _iv_dps(dps), workdps(dps):
            acc = iv.mpf(0)
            for p, e in self.exponents.items():
                acc += _iv_fraction(e) * iv.log(iv.mpf(p))
            val = iv.exp(acc)
            return mpf(val.a), mpf(val.b)

    def __eq__(self, other):
        return isinstance(other, RadicalScalar) and self.exponents == other.exponents

    def __hash__(self):
        return hash(("RadicalScalar", tuple(self.exponents.items())))

    def __repr__(self) -> str:
        return f"RadicalScalar({self})"

    def __str__(self) -> str:
        if not self.exponents:
            return "1"
        parts = []
        for p, e in self.exponents.items():
            if e == 1:
                parts.append(str(p))
            else:
                parts.append(f"{p}^({e})")
        return "*".join(parts)


def radical_degree(a: RadicalScalar) -> int:
    """[Q(a) : Q]: the least m with a**m rational, which is the lcm of
    the exponent denominators."""
    d = 1
    for e in a.exponents.values():
        d = lcm(d, e.denominator)
    return d


def compositum_degree(scalars) -> int:
    """[Q(a_1, ..., a_k) : Q] for radical scalars, via the exponent
    lattice: the index of Z^S in the group generated by Z^S and the
    exponent vectors, computed with an exact Smith normal form."""
    scalars = [s for s in scalars if s is not None]
    primes = sorted({p for s in scalars for p in s.exponents})
    if not primes:
        return 1
    m = 1
    for s in scalars:
        for e in s.exponents.values():
            m = lcm(m, e.denominator)
    if m == 1:
        return 1
    n = len(primes)
    rows = []
    for s in scalars:
        row = [int(s.exponents.get(p, Fraction(0)) * m) for p in primes]
        if any(row):
            rows.append(row)
    for i in range(n):
        rows.append([m if j == i else 0 for j in range(n)])
    s_mat, _, _ = smith_normal_form(IntMatrix(rows))
    prod_d = 1
    for i in range(n):
        prod_d *= s_mat[i, i]
    degree, rem = divmod(m**n, prod_d)
    if rem:
        raise ArithmeticError("lattice index computation is inconsistent")
    return degree


def radical_height(a: RadicalScalar) -> HeightValue:
    """Exact Weil height of a radical scalar.

    Denominator places contribute sum_{e_l<0} (-e_l) log l; the
    archimedean place contributes log of the value when that is >= 1.
    Combined: sum_p max(e_p, 0) log p if the value is >= 1, else
    sum_p max(-e_p, 0) log p.  The branch is decided by a certified
    sign computation (exact for the tie value = 1)."""
    if a.is_one():
        return HeightValue.zero()
    s = a.log_value().sign()
    if s >= 0:
        comb = LogCombination({p: e for p, e in a.exponents.items() if e > 0})
    else:
        comb = LogCombination({p: -e for p, e in a.exponents.items() if e < 0})
    return HeightValue(exact=comb)


# ---------------------------------------------------------------------------
# projective points
# ---------------------------------------------------------------------------

class RadicalPoint:
    """A point of P^N with coordinates that are radical scalars or zero
    (zero encoded as None).  At least one coordinate must be nonzero."""

    __slots__ = ("coords",)

    def __init__(self, coords):
        cs = []
        for c in coords:
            if c is None:
                cs.append(None)
            elif isinstance(c, RadicalScalar):
                cs.append(c)
            else:
                cs.append(RadicalScalar.from_rational(c))
        if not any(c is not None for c in cs):
            raise ValueError("a projective point needs a nonzero coordinate")
        if len(cs) < 2:
            raise ValueError("need at least two homogeneous coordinates")
        self.coords = tuple(cs)

    @property
    def dim(self) -> int:
        return len(self.coords) - 1

    def normalized(self) -> "RadicalPoint":
        """Scale so the first nonzero coordinate is 1."""
        first = next(c for c in self.coords if c is not None)
        if first.is_one():
            return self
        return RadicalPoint(
            [None if c is None else c / first for c in self.coords]
        )

    def affine_coords(self) -> list[RadicalScalar | None]:
        """Coordinates other than the leading 1 of the normalized point."""
        norm = self.normalized()
        lead = next(i for i, c in enumerate(norm.coords) if c is not None)
        return [c for i, c in enumerate(norm.coords) if i != lead]

    def __eq__(self, other):
        return isinstance(other, RadicalPoint) and self.coords == other.coords

    def __hash__(self):
        return hash(("RadicalPoint", self.coords))

    def __repr__(self):
        inner = " : ".join("0" if c is None else str(c) for c in self.coords)
        return f"[{inner}]"


def projective_height(point: RadicalPoint) -> HeightValue:
    """Exact projective Weil height of a radical point.

    Per finite place l the contribution is log max_i |x_i|_l, i.e.
    max_i(-e_{l,i}) * log l over the nonzero coordinates; the
    archimedean place contributes log max_i x_i, the maximizer found by
    certified comparison (a tie forces identical exponent vectors, so
    it is resolved by coefficient identity)."""
    nz = [c for c in point.coords if c is not None]
    primes = sorted({p for c in nz for p in c.exponents})
    coeffs: dict[int, Fraction] = {}
    for l in primes:
        c_l = max(-c.exponents.get(l, Fraction(0)) for c in nz)
        if c_l != 0:
            coeffs[l] = c_l
    finite = LogCombination(coeffs)
    best = nz[0]
    for c in nz[1:]:
        if (c.log_value() - best.log_value()).sign() > 0:
            best = c
    return HeightValue(exact=finite + best.log_value())


def projective_height_l2(point: RadicalPoint, precision_digits: int = DEFAULT_DIGITS) -> HeightValue:
    """Projective height with the L2 archimedean norm: finite places as
    in ``projective_height``, archimedean contribution
    (1/2) log(sum_i x_i^2).  Exceeds the sup-norm height by at most
    (1/2) log(N+1)."""
    nz = [c for c in point.coords if c is not None]
    primes = sorted({p for c in nz for p in c.exponents})
    coeffs: dict[int, Fraction] = {}
    for l in primes:
        c_l = max(-c.exponents.get(l, Fraction(0)) for c in nz)
        if c_l != 0:
            coeffs[l] = c_l
    finite = LogCombination(coeffs)
    dps = precision_digits + 12
    with _iv_dps(dps), workdps(dps):
        acc = iv.mpf(0)
        for c in nz:
            e = iv.mpf(0)
            for p, ex in c.exponents.items():
                e += _iv_fraction(ex) * iv.log(iv.mpf(p))
            acc += iv.exp(2 * e)
        arch = iv.log(acc) / 2
        flo, fhi = finite.interval(dps)
        lo = flo + mpf(arch.a)
        hi = fhi + mpf(arch.b)
        mid = (lo + hi) / 2
        rad = (hi - lo) / 2 + mpf(10) ** (-dps + 2)
    return HeightValue(numeric=BigFloat(mid, rad))


def _pow_rational_is_exact(base: int, gamma: Fraction) -> bool:
    if gamma.denominator == 1 or base == 1:
        return True
    # base**gamma rational iff every prime exponent of base**num is
    # divisible by den
    fac = factorint(base)
    return all((e * gamma.numerator) % gamma.denominator == 0 for e in fac.values())


def _pow_rational(base: int, gamma: Fraction) -> Fraction:
    if base == 1:
        return Fraction(1)
    if gamma.denominator == 1:
        return Fraction(base) ** gamma.numerator
    out = Fraction(1)
    for p, e in factorint(base).items():
        k = Fraction(e) * gamma
        out *= Fraction(p) ** int(k)
    return out


def weighted_projective_height(
    point: RadicalPoint, gamma, precision_digits: int = DEFAULT_DIGITS
) -> HeightValue:
    """Degree-weighted projective height: [Q(x_1,...,x_N):Q]**gamma
    times the projective height, the point normalized so its first
    nonzero coordinate is 1.  Exact whenever the degree power is
    rational (in particular for integer gamma)."""
    gamma = Fraction(gamma)
    norm = point.normalized()
    degree = compositum_degree([c for c in norm.coords if c is not None])
    base = projective_height(norm)
    if _pow_rational_is_exact(degree, gamma):
        return HeightValue(exact=base.exact.scale(_pow_rational(degree, gamma)))
    dps = precision_digits + 12
    with _iv_dps(dps), workdps(dps):
        w = iv.exp(_iv_fraction(gamma) * iv.log(iv.mpf(degree)))
        blo, bhi = base.exact.interval(dps)
        prod = w * iv.mpf([blo, bhi])
        lo, hi = mpf(prod.a), mpf(prod.b)
        mid = (lo + hi) / 2
        rad = (hi - lo) / 2 + mpf(10) ** (-dps + 2)
    return HeightValue(numeric=BigFloat(mid, rad))


# ---------------------------------------------------------------------------
# the chain inequality
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainReport:
    """Outcome of one chain verification."""

    point: RadicalPoint
    gamma: Fraction
    n_coords: int
    index_set: tuple[int, ...]
    lhs: HeightValue
    middle: HeightValue
    rhs: HeightValue
    verdict: str  # "holds" or "degenerate"


class ChainViolationError(AssertionError):
    """The certified comparison found the chain inequality violated."""


def _interval_value(comb_pairs, dps: int):
    """Enclosure of  prod base_i^{q_i} * (prod positive-values)^{1/k}
    style products, given as a list of ('pow', base, Fraction) and
    ('geom', [LogCombination...], k) items.  Returns (lo, hi) mpf."""
    with _iv_dps(dps), workdps(dps):
        acc = iv.mpf(0)  # accumulate logs
        for item in comb_pairs:
            if item[0] == "pow":
                _, base, q = item
                acc += _iv_fraction(q) * iv.log(iv.mpf(base))
            elif item[0] == "geom":
                _, combs, k = item
                s = iv.mpf(0)
                for c in combs:
                    lo, hi = c.interval(dps)
                    if not lo > 0:
                        return None
                    s += iv.log(iv.mpf([lo, hi]))
                acc += s / k
            else:  # ('logcomb', LogCombination): multiply by its value
                _, c = item
                lo, hi = c.interval(dps)
                if not lo > 0:
                    return None
                acc += iv.log(iv.mpf([lo, hi]))
        val = iv.exp(acc)
        return mpf(val.a), mpf(val.b)


def lemma_chain_check(
    point: RadicalPoint, gamma, precision_digits: int = DEFAULT_DIGITS
) -> ChainReport:
    """Certify the two-step height chain for a radical point and
    negative weight gamma.

    Writing P = [1 : a_1 : ... : a_N] (the point is normalized first),
    K = Q(a_1,...,a_N), and I = {i : weighted height of a_i is nonzero}
    = {i : a_i is neither 0 nor 1}:

      lhs    = [K:Q]^gamma * h(P)
      middle = (prod_{i in I} [Q(a_i):Q]^gamma)
               * (prod_{i in I} h(a_i))^{1/#I}
      rhs    = (prod_{i in I} h_{N*gamma}(a_i))^{1/#I}

    and the chain asserts lhs >= middle >= rhs.  Empty I gives verdict
    "degenerate".  middle >= rhs reduces to the sign of
    gamma*(1 - N/#I) * sum log d_i, settled by rational arithmetic.
    lhs >= middle has a complete structural equality criterion
    ([K:Q] = prod d_i, all h(a_i) equal, h(P) equal to them); strict
    cases are separated by escalating certified intervals.  A violation
    raises ChainViolationError."""
    gamma = Fraction(gamma)
    if gamma >= 0:
        raise ValueError("the chain is stated for negative gamma")
    norm = point.normalized()
    n = norm.dim
    affine = norm.affine_coords()
    index_set = tuple(
        i for i, a in enumerate(affine) if a is not None and not a.is_one()
    )
    if not index_set:
        zero = HeightValue.zero()
        return ChainReport(norm, gamma, n, index_set, zero, zero, zero, "degenerate")

    members = [affine[i] for i in index_set]
    k = len(index_set)
    degrees = [radical_degree(a) for a in members]
    heights = [radical_height(a).exact for a in members]
    k_degree = compositum_degree([c for c in norm.coords if c is not None])
    d_prod = 1
    for d in degrees:
        d_prod *= d
    h_point = projective_height(norm).exact

    # --- middle >= rhs: exact trichotomy -------------------------------
    # log(middle/rhs) = gamma * (1 - N/k) * sum log d_i
    slope = gamma * (1 - Fraction(n, k))
    if all(d == 1 for d in degrees) or slope == 0:
        middle_vs_rhs = EQUAL
    elif slope > 0:
        middle_vs_rhs = GREATER
    else:
        middle_vs_rhs = LESS
    if middle_vs_rhs is LESS:
        raise ChainViolationError("middle < rhs (impossible for gamma < 0)")

    # --- lhs >= middle: structural equality, else interval separation --
    all_h_equal = all(h == heights[0] for h in heights[1:])
    structurally_equal = (
        k_degree == d_prod and all_h_equal and h_point == heights[0]
    )
    if not structurally_equal:
        separated = False
        dps = max(40, precision_digits)
        while dps <= 1 << 13:
            lhs_iv = _interval_value(
                [("pow", k_degree, gamma), ("logcomb", h_point)], dps
            )
            mid_iv = _interval_value(
                [("pow", d_prod, gamma), ("geom", heights, k)], dps
            )
            if lhs_iv is not None and mid_iv is not None:
                if lhs_iv[0] > mid_iv[1]:
                    separated = True
                    break
                if lhs_iv[1] < mid_iv[0]:
                    raise ChainViolationError(
                        f"lhs < middle at point {norm!r}, gamma={gamma}"
                    )
            dps *= 2
        if not separated:
            raise PrecisionError("chain comparison did not separate")

    # --- report values --------------------------------------------------
    def power_height(base_deg: int, g: Fraction, comb: LogCombination) -> HeightValue:
        if _pow_rational_is_exact(base_deg, g):
            return HeightValue(exact=comb.scale(_pow_rational(base_deg, g)))
        enc = _interval_value([("pow", base_deg, g), ("logcomb", comb)], precision_digits + 10)
        if enc is None:
            return HeightValue(numeric=BigFloat(0, mpf(1)))
        lo, hi = enc
        return HeightValue(numeric=BigFloat((lo + hi) / 2, (hi - lo) / 2))

    lhs = power_height(k_degree, gamma, h_point)
    if all_h_equal and _pow_rational_is_exact(d_prod, gamma):
        middle = HeightValue(exact=heights[0].scale(_pow_rational(d_prod, gamma)))
    else:
        enc = _interval_value(
            [("pow", d_prod, gamma), ("geom", heights, k)], precision_digits + 10
        )
        lo, hi = enc if enc else (mpf(0), mpf(1))
        middle = HeightValue(numeric=BigFloat((lo + hi) / 2, (hi - lo) / 2))
    ng_over_k = Fraction(n) * gamma / k
    if all_h_equal and _pow_rational_is_exact(d_prod, ng_over_k):
        rhs = HeightValue(exact=heights[0].scale(_pow_rational(d_prod, ng_over_k)))
    else:
        enc = _interval_value(
            [("pow", d_prod, ng_over_k), ("geom", heights, k)], precision_digits + 10
        )
        lo, hi = enc if enc else (mpf(0), mpf(1))
        rhs = HeightValue(numeric=BigFloat((lo + hi) / 2, (hi - lo) / 2))

    return ChainReport(norm, gamma, n, index_set, lhs, middle, rhs, "holds")


# ---------------------------------------------------------------------------
# Northcott census
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CensusEntry:
    signs: tuple[int, ...]  # sign per coordinate (0 for zero coords)
    point: RadicalPoint
    height: HeightValue

    def coord_strings(self) -> list[str]:
        out = []
        for s, c in zip(self.signs, self.point.coords):
            if s == 0:
                out.append("0")
            else:
                out.append(("-" if s < 0 else "") + str(c))
        return out


@dataclass(frozen=True)
class NorthcottCensus:
    entries: tuple[CensusEntry, ...]
    threshold: LogCombination
    gamma: Fraction
    dim: int
    evaluated: int
    budget: int
    shell_bound: int
    truncated: bool


def _census_atoms(generators, bound: int) -> list[RadicalScalar]:
    """Coordinate magnitudes of complexity <= bound: (p/q) * prod g^k
    with coprime 1 <= p, q <= bound and |k_j| <= bound; deduplicated by
    exponent vector, sorted lexicographically by exponent vector."""
    from math import gcd

    atoms: dict[tuple, RadicalScalar] = {}
    k_ranges = [range(-bound, bound + 1) for _ in generators]
    for p in range(1, bound + 1):
        for q in range(1, bound + 1):
            if gcd(p, q) != 1:
                continue
            base = RadicalScalar.from_rational(Fraction(p, q))
            for ks in itertools.product(*k_ranges):
                a = base
                for g, k in zip(generators, ks):
                    if k:
                        a = a * g.pow(k)
                key = tuple(a.exponents.items())
                atoms.setdefault(key, a)
    return [atoms[k] for k in sorted(atoms)]


def _height_below(h: HeightValue, threshold: LogCombination, precision_digits: int) -> bool:
    """Certified strict comparison h < threshold (exact tie excluded)."""
    if h.is_exact:
        return (h.exact - threshold).sign() < 0
    dps = precision_digits + 10
    for _ in range(6):
        tlo, thi = threshold.interval(dps)
        hlo, hhi = h.bounds(dps)
        if hhi < tlo:
            return True
        if hlo > thi:
            return False
        dps *= 2
    raise PrecisionError("census threshold comparison did not separate")


def projective_northcott_experiment(
    generators,
    dim: int,
    gamma,
    threshold,
    budget: int = 2000,
    precision_digits: int = DEFAULT_DIGITS,
) -> NorthcottCensus:
    """Enumerate points of P^dim whose coordinates are 0 or
    +-(p/q) * (monomials in the generators), in shells of growing
    coordinate complexity, and report every point with weighted
    projective height strictly below the threshold.

    Enumeration is deterministic: chart by chart (position of the
    leading 1), remaining slots in lexicographic order over the atom
    list, signs + before -.  Each shell only evaluates points that use
    at least one atom new to the shell, so no point is seen twice.
    ``budget`` caps the number of evaluated points; exhausting it sets
    ``truncated``."""
    generators = list(generators)
    gamma = Fraction(gamma)
    if isinstance(threshold, HeightValue):
        if not threshold.is_exact:
            raise ValueError("census thresholds must be exact")
        threshold = threshold.exact
    elif not isinstance(threshold, LogCombination):
        threshold = LogCombination(const=Fraction(threshold))

    entries: list[CensusEntry] = []
    evaluated = 0
    truncated = False
    bound = 0
    prev_atoms: set[RadicalScalar] = set()
    while not truncated and bound < 64:
        bound += 1
        atoms = _census_atoms(generators, bound)
        options: list[tuple[int, RadicalScalar | None]] = [(0, None)]
        for a in atoms:
            options.append((1, a))
            options.append((-1, a))
        new = {a for a in atoms if a not in prev_atoms}
        if not new and bound > 1:
            break
        for chart in range(dim + 1):
            slots = dim - chart
            for combo in itertools.product(options, repeat=slots):
                if bound > 1 and not any(
                    c is not None and c in new for _, c in combo
                ):
                    continue
                if evaluated >= budget:
                    truncated = True
                    break
                evaluated += 1
                signs = (0,) * chart + (1,) + tuple(s for s, _ in combo)
                coords = (None,) * chart + (RadicalScalar.one(),) + tuple(
                    c for _, c in combo
                )
                pt = RadicalPoint.__new__(RadicalPoint)
                pt.coords = coords
                h = weighted_projective_height(pt, gamma, precision_digits)
                if _height_below(h, threshold, precision_digits):
                    entries.append(CensusEntry(signs, pt, h))
            if truncated:
                break
        prev_atoms = set(atoms)
    return NorthcottCensus(
        entries=tuple(entries),
        threshold=threshold,
        gamma=gamma,
        dim=dim,
        evaluated=evaluated,
        budget=budget,
        shell_bound=bound,
        truncated=truncated,
    )
