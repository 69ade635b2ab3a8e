"""Closed-form evaluators for the enumerative invariants and their pairings.

The evaluation engine: every rank-r formula is an iterated residue of a
product of factor series in the frozen-z_0 region |w| < |z_1| < ... <
|z_{r-1}|, assembled through the exact-window pipeline driver.  The
regularized-sum path reruns the same residues with the lattice decomposition
machinery instead of the pre-summed geometric series, and must agree exactly.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from functools import lru_cache
from math import ceil, floor, gcd

from .exact import bernoulli_polynomial
from .laurent import (
    Factor,
    Series,
    exp_series,
    invert_linear_form,
    linear_series,
    geometric_ratio_sum,
    one_minus_exp_reciprocal,
    operator_exp,
    pipeline_residue,
    power_linear_form,
)
from .regsum import (
    AffineLattice,
    Polytope,
    PolytopeFunction,
    boundary_weight_indicators,
    decompose,
    partial_sum_functional,
)
from .superalg import (
    SuperPoly,
    alpha_var,
    derive,
    dual_pair,
    pair_var,
    s_var,
    set_vars_to_zero,
    substitute,
)
from .vertex import (
    CurveContext,
    HomologyClass,
    fix_gauge_dual,
    normal_form,
    translation,
)

S101 = s_var(1, 0, 1)
S122 = s_var(1, 2, 2)


def default_nu(r: int, d: int) -> int:
    """Smallest twist with r*nu + d > 0."""
    if r <= 0:
        raise ValueError("needs positive rank")
    return -((d - 1) // r)


def pair_apex_degrees(r: int, d: int) -> list[int]:
    """Ceiling-sequence apex degrees with the end corrections."""
    apex = [-((-(i + 1) * d) // r) - (-((-i * d) // r)) for i in range(r)]
    apex[r - 1] += 1
    apex[0] -= 1
    return apex


def default_pair_nu(r: int, d: int) -> int:
    """Smallest twist for which the summed framed formula is valid.

    Beyond r*nu + d > 0, the pre-summed residue form needs every apex power
    nu + d_i to be at least 1 (the twist is a free large parameter; below
    this threshold the display loses the framing-variable content).
    """
    return max(default_nu(r, d), 1 - min(pair_apex_degrees(r, d)))


def in_positive_cone(r: int, d: int) -> bool:
    return r > 0 or (r == 0 and d > 0)


def sigma_poly(g: int, x: SuperPoly) -> SuperPoly:
    """prod_{j=1..g} (x + s_{j,1,1} s_{j+g,1,1})."""
    out = SuperPoly.scalar(1)
    for j in range(1, g + 1):
        out = out * (x + SuperPoly.var(s_var(j, 1, 1)) * SuperPoly.var(s_var(j + g, 1, 1)))
    return out


def class_degree(g: int, r: int) -> int:
    return 2 * (g - 1) * r * r + 2


def fd_class_degree(g: int, r: int) -> int:
    return 2 * (r * r - 1) * (g - 1)


# -- rank 0 and rank 1 -------------------------------------------------------

@lru_cache(maxsize=None)
def rank0_class(g: int, d: int) -> HomologyClass:
    """Normal form of the rank-zero invariant (d > 0)."""
    if d <= 0:
        raise ValueError("rank-zero invariants need d > 0")
    rep = SuperPoly.var(S101) * Fraction(1, d)
    for j in range(1, g + 1):
        rep += SuperPoly.var(s_var(j, 1, 1)) * SuperPoly.var(s_var(j + g, 1, 1))
    rep = rep * _sign(d - 1)
    rep = normal_form(rep, (0, d), CurveContext(g))
    return HomologyClass((0, d), rep, gauge="normal")


@lru_cache(maxsize=None)
def rank1_class(g: int, d: int) -> HomologyClass:
    return HomologyClass((1, d), sigma_poly(g, -SuperPoly.var(S122)), gauge="xi",
                         extrapolated=(g == 0))


def _rho_series(vars, which: str, cap: int) -> Series:
    """exp(sum_l (-1)^l w^l / l! s_{+,0,l}) truncated at w^cap."""
    x = Series(vars)
    fact = 1
    for l in range(1, max(cap, 0) + 1):
        fact *= l
        x += Series.monomial(vars, {which: l},
                             SuperPoly.var(pair_var(l)) * Fraction((-1) ** l, fact))
    caps = {v: (cap if v == which else 0) for v in vars}
    return exp_series(x, caps)


@lru_cache(maxsize=None)
def pair_rank1_class(g: int, d: int, nu: int | None = None) -> HomologyClass:
    """res_w of w^{-(nu+d)} rho(w) sigma(1/w - s_{1,2,2})."""
    if nu is None:
        nu = default_nu(1, d)
    vars = ("w",)
    power = nu + d

    def build_sigma(caps):
        inv_w = Series.monomial(vars, {"w": -1}, 1)
        out = Series.const(vars, 1)
        base = Series.const(vars, -SuperPoly.var(S122))
        for j in range(1, g + 1):
            sig_j = SuperPoly.var(s_var(j, 1, 1)) * SuperPoly.var(s_var(j + g, 1, 1))
            out = out.mul(inv_w + base + Series.const(vars, sig_j), caps)
        return out

    factors = [
        Factor(lambda caps: Series.monomial(vars, {"w": -power}, 1),
               poles={"w": (power, (), 0)} if power > 0 else {}, name="w-power"),
        Factor(lambda caps: _rho_series(vars, "w", caps["w"]), name="rho"),
        Factor(build_sigma, poles={"w": (g, (), 0)}, name="sigma"),
    ]
    rep = pipeline_residue(vars, factors)
    return HomologyClass((1, d, 1), rep, gauge="xi", nu=nu, extrapolated=(g == 0))


# -- the higher-rank residue pipelines ---------------------------------------

def _zvars(r: int) -> tuple[str, ...]:
    return tuple(f"z{i}" for i in range(1, r))


def _ztilde(r: int, i: int) -> dict[str, Fraction]:
    """z_i - (z_0 + ... + z_{r-1})/r with z_0 = 0, as a linear form."""
    out = {f"z{k}": Fraction(-1, r) for k in range(1, r)}
    if i > 0:
        out[f"z{i}"] = out[f"z{i}"] + 1
    return {k: v for k, v in out.items() if v}


@lru_cache(maxsize=None)
def _translation_powers(g: int, d_i: int, n: int) -> SuperPoly:
    """D_{(1, d_i)}^n sigma(-s_{1,2,2}) / n!, cached."""
    if n == 0:
        return sigma_poly(g, -SuperPoly.var(S122))
    prev = _translation_powers(g, d_i, n - 1)
    return translation(prev, (1, d_i)) * Fraction(1, n)


def _exp_factor(vars, g: int, d_i: int, zform: dict[str, Fraction]) -> Factor:
    def build(caps):
        total = Series.const(vars, _translation_powers(g, d_i, 0))
        zpow = Series.const(vars, 1)
        n = 0
        while True:
            n += 1
            zpow = zpow.mul(linear_series(vars, zform), caps)
            if not zpow:
                break
            poly = _translation_powers(g, d_i, n)
            if poly:
                total += zpow.map_poly(lambda p, q=poly: p * q)
        return total
    return Factor(build, name=f"exp(zD_(1,{d_i}))")


def _difference_factors(vars, g: int, r: int) -> list[Factor]:
    """prod_{0<=i<j<=r-1} (z_i - z_j)^{-(2g-2)} with z_0 frozen to 0."""
    out = []
    p = 2 * g - 2
    for i in range(0, r - 1):
        for j in range(i + 1, r):
            coeffs = {f"z{j}": Fraction(-1)}
            if i > 0:
                coeffs[f"z{i}"] = Fraction(1)
            if p > 0:
                out.append(Factor(
                    (lambda caps, c=coeffs: invert_linear_form(vars, c, p, caps)),
                    poles={f"z{j}": (p, (f"z{i}",) if i > 0 else (), 0)},
                    name=f"(z{i}-z{j})^-{p}"))
            elif p < 0:
                out.append(Factor(
                    (lambda caps, c=coeffs: power_linear_form(vars, c, -p, caps)),
                    name=f"(z{i}-z{j})^{-p}"))
    return out


def _recip_factor(vars, r: int, i: int, weight, unit, scale=1) -> Factor:
    za = _ztilde(r, i)
    zb = _ztilde(r, i - 1)
    coupled = (f"z{i-1}",) if i >= 2 else ()
    return Factor(
        (lambda caps: one_minus_exp_reciprocal(vars, za, zb, weight, unit, caps, scale)),
        poles={f"z{i}": (1, coupled, 0)},
        name=f"recip-{i}" + (f"*{scale}" if scale != 1 else ""))


def _sign(n: int) -> int:
    return -1 if n % 2 else 1


def _sheaf_prefactor_sign(g: int, r: int, d: int) -> int:
    return _sign((g - 1) * r * (r - 1) // 2 + (r - 1) * (d - 1))


def _admissible_subsets(r: int, d: int):
    idx = [i for i in range(1, r) if (i * d) % r == 0]
    for msize in range(len(idx) + 1):
        for subset in itertools.combinations(idx, msize):
            yield frozenset(subset)


def _sheaf_weight(l: int) -> SuperPoly:
    return SuperPoly.var(s_var(1, 2, l + 1))


@lru_cache(maxsize=None)
def sheaf_class(g: int, r: int, d: int) -> HomologyClass:
    """The semistable-sheaf invariant, pre-summed closed form (r >= 1)."""
    if r < 1:
        raise ValueError("the residue formula needs r >= 1")
    if r == 1:
        return rank1_class(g, d)
    vars = _zvars(r)
    apex = [floor((i + 1) * d / r) - floor(i * d / r) for i in range(r)]
    base = _difference_factors(vars, g, r)
    exps = [_exp_factor(vars, g, apex[i], _ztilde(r, i)) for i in range(r)]
    total = SuperPoly.zero()
    for subset in _admissible_subsets(r, d):
        factors = list(base) + exps[:]
        for i in range(1, r):
            if i not in subset:
                factors.append(_recip_factor(vars, r, i, _sheaf_weight, S122))
        coeff = Fraction((-1) ** len(subset), len(subset) + 1)
        total += pipeline_residue(vars, factors) * coeff
    total = total * Fraction(_sheaf_prefactor_sign(g, r, d), r)
    return HomologyClass((r, d), total, gauge="xi", extrapolated=(g == 0))


@lru_cache(maxsize=None)
def rank2_class(g: int, d: int) -> HomologyClass:
    """Rank-2 single-residue oracle (odd-level weights, floor/ceil split)."""
    vars = ("z1",)
    factors = []
    p = 2 * g - 2
    if p > 0:
        factors.append(Factor(lambda caps: Series.monomial(vars, {"z1": -p}, 1),
                              poles={"z1": (p, (), 0)}, name="z^-(2g-2)"))
    elif p < 0:
        factors.append(Factor(lambda caps: Series.monomial(vars, {"z1": -p}, 1),
                              name="z^(2-2g)"))
    za = {"z1": Fraction(1, 2)}
    zb = {"z1": Fraction(-1, 2)}
    factors.append(Factor(
        lambda caps: one_minus_exp_reciprocal(vars, za, zb, _sheaf_weight, S122, caps),
        poles={"z1": (1, (), 0)}, name="recip"))
    factors.append(_exp_factor(vars, g, d // 2, zb))
    factors.append(_exp_factor(vars, g, -(d // -2), za))
    rep = pipeline_residue(vars, factors) * Fraction(_sign(g + d), 2)
    return HomologyClass((2, d), rep, gauge="xi", extrapolated=(g == 0))


@lru_cache(maxsize=None)
def pair_class(g: int, r: int, d: int, nu: int | None = None) -> HomologyClass:
    """The framed pair invariant (e = 1), pre-summed closed form."""
    if r < 1:
        raise ValueError("the residue formula needs r >= 1")
    if nu is None:
        nu = default_pair_nu(r, d)
    if r == 1:
        return pair_rank1_class(g, d, nu)
    apex = pair_apex_degrees(r, d)
    if r * nu + d <= 0 or nu + min(apex) < 1:
        raise ValueError("twist too small for the pre-summed framed formula")
    vars = ("w",) + _zvars(r)
    factors = _difference_factors(vars, g, r)
    for i in range(r):
        power = nu + apex[i]
        if i == 0:
            if power:
                factors.append(Factor(
                    (lambda caps, pw=power: Series.monomial(vars, {"w": -pw}, 1)),
                    poles={"w": (power, (), 0)} if power > 0 else {}, name="w-power"))
        else:
            coeffs = {"w": Fraction(1), f"z{i}": Fraction(1)}
            if power > 0:
                factors.append(Factor(
                    (lambda caps, c=coeffs, pw=power: invert_linear_form(vars, c, pw, caps)),
                    poles={f"z{i}": (power, ("w",), 0)}, name=f"(w+z{i})^-{power}"))
            elif power < 0:
                factors.append(Factor(
                    (lambda caps, c=coeffs, pw=power: power_linear_form(vars, c, -pw, caps)),
                    name=f"(w+z{i})^{-power}"))
    factors.append(Factor(lambda caps: _rho_series(vars, "w", caps["w"]), name="rho"))
    for i in range(1, r):
        factors.append(_pair_recip_factor(vars, r, i))
    for i in range(r):
        factors.append(_pair_exp_factor(vars, g, apex[i], i))
    rep = pipeline_residue(vars, factors) * _sheaf_prefactor_sign(g, r, d)
    return HomologyClass((r, d, 1), rep, gauge="xi", nu=nu, extrapolated=(g == 0))


def _pair_recip_factor(vars, r: int, i: int) -> Factor:
    """sum over the framed geometric ratio exp(X_i) (w+z_{i-1})/(w+z_i).

    Every power of the ratio lowers z_i against w- and z_{i-1}-positives, so
    the sector sum is directly summable within any window (no localization
    enters, unlike the sheaf-side reciprocal).
    """
    za = _ztilde(r, i)
    zb = _ztilde(r, i - 1)
    num = {"w": Fraction(1)}
    if i - 1 > 0:
        num[f"z{i-1}"] = Fraction(1)
    den = {"w": Fraction(1), f"z{i}": Fraction(1)}
    coupled = ("w", f"z{i-1}") if i >= 2 else ("w",)

    def build(caps):
        lmax = sum(max(c, 0) for c in caps.values()) + 1
        x = Series(vars)
        fl = 1
        for l in range(1, lmax + 1):
            fl *= l
            w = _sheaf_weight(l)
            x += (power_linear_form(vars, za, l, caps)
                  - power_linear_form(vars, zb, l, caps)).scale(
                      Fraction(1, fl)).map_poly(lambda q, w=w: q * w)
        ratio = exp_series(x, caps).mul(linear_series(vars, num), caps)
        ratio = ratio.mul(invert_linear_form(vars, den, 1, caps), caps)
        return geometric_ratio_sum(ratio, caps)

    return Factor(build, poles={f"z{i}": (0, coupled, 0)}, name=f"pair-recip-{i}")


def _pair_exp_factor(vars, g: int, d_i: int, i: int) -> Factor:
    """exp(ztilde_i D_{(1,d_i)}) sigma(1/(w+z_i) - s_{1,2,2})."""
    r = len(vars)  # vars = (w, z1..z_{r-1})
    zform = _ztilde(r, i)

    def build(caps):
        if i == 0:
            inv = Series.monomial(vars, {"w": -1}, 1)
        else:
            inv = invert_linear_form(vars, {"w": Fraction(1), f"z{i}": Fraction(1)}, 1, caps)
        seed = Series.const(vars, 1)
        for j in range(1, g + 1):
            sig_j = SuperPoly.var(s_var(j, 1, 1)) * SuperPoly.var(s_var(j + g, 1, 1))
            seed = seed.mul(inv + Series.const(vars, sig_j - SuperPoly.var(S122)), caps)
        return operator_exp(zform, lambda p: translation(p, (1, d_i)), seed, caps)

    poles = {"w": (g, (), 0)} if i == 0 else {f"z{i}": (g, ("w",), 0)}
    return Factor(build, poles=poles, name=f"pair-exp-{i}")


# -- the regularized-sum evaluation path --------------------------------------

def degree_lattice(r: int, d: int) -> AffineLattice:
    """Integer r-tuples summing to d, generated by consecutive differences."""
    base = tuple([Fraction(d)] + [Fraction(0)] * (r - 1))
    gens = []
    for i in range(1, r):
        v = [Fraction(0)] * r
        v[i] = Fraction(1)
        v[i - 1] = Fraction(-1)
        gens.append(tuple(v))
    return AffineLattice(base, tuple(gens))


def _weight_polytopes(r: int, d: int) -> PolytopeFunction:
    """Boundary-weight indicators on raw degree vectors (uncentered)."""
    terms = []
    for coeff, poly in boundary_weight_indicators(r).terms:
        cons = []
        for coeffs, rel, bound in poly.constraints:
            shift = sum(coeffs) * Fraction(d, r)
            cons.append((coeffs, rel, bound + shift))
        terms.append((coeff, Polytope.of(cons)))
    return PolytopeFunction.of(terms)


@lru_cache(maxsize=None)
def sheaf_class_via_regsum(g: int, r: int, d: int) -> HomologyClass:
    """Evaluate the invariant as a regularized sum over the degree lattice.

    Decomposes each weighted polytope into simple sectors; every sector
    contributes (apex geometric value) * prod (1 - ratio(gen))^{-1} inside
    the residue pipeline.  Must agree exactly with the pre-summed form.
    """
    if r < 1:
        raise ValueError("the residue formula needs r >= 1")
    if r == 1:
        return rank1_class(g, d)
    vars = _zvars(r)
    lattice = degree_lattice(r, d)
    base = _difference_factors(vars, g, r)
    total = SuperPoly.zero()
    for coeff, polytope in _weight_polytopes(r, d).terms:
        for sector in decompose(polytope, lattice):
            apex = [int(x) for x in sector.apex]
            factors = list(base)
            for i in range(r):
                factors.append(_exp_factor(vars, g, apex[i], _ztilde(r, i)))
            for gen in sector.gens:
                coords = lattice.direction_coords(gen)
                nz = [(i + 1, c) for i, c in enumerate(coords) if c]
                if len(nz) != 1 or abs(nz[0][1]) != 1:
                    raise NotImplementedError(
                        "sector generator is not a consecutive difference")
                i, sign = nz[0]
                factors.append(_recip_factor(vars, r, i, _sheaf_weight, S122, scale=sign))
            total += pipeline_residue(vars, factors) * coeff
    total = total * Fraction(_sheaf_prefactor_sign(g, r, d), r)
    return HomologyClass((r, d), total, gauge="xi", extrapolated=(g == 0))


# -- fixed determinant, elliptic oracle, transforms ---------------------------

@lru_cache(maxsize=None)
def fixed_det_class(g: int, r: int, d: int) -> HomologyClass:
    """Apply the ordered odd-derivative product to the gauge-fixed invariant."""
    cls = sheaf_class(g, r, d)
    rep = cls.rep
    for j in range(1, g + 1):
        rep = derive(rep, s_var(j, 1, 1))
        rep = derive(rep, s_var(j + g, 1, 1))
    return HomologyClass((r, d), rep, gauge="xi", extrapolated=cls.extrapolated)


@lru_cache(maxsize=None)
def elliptic_class(r: int, d: int) -> HomologyClass:
    """Genus-1 closed form, the r != 0 branch."""
    if r == 0:
        raise ValueError("use rank0_class for rank zero")
    rep = (SuperPoly.var(S122) * Fraction(-1, r)
           + SuperPoly.var(s_var(1, 1, 1)) * SuperPoly.var(s_var(2, 1, 1)))
    return HomologyClass((r, d), rep * _sign((r - 1) * (d - 1)), gauge="xi")


def tensor_shift(cls: HomologyClass, direction: int = 1) -> HomologyClass:
    """Degree shift by tensoring with a line bundle of degree +-1."""
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if cls.is_pair():
        raise ValueError("tensor shift implemented for sheaf classes")
    rule = {}
    for v in cls.rep.variables():
        fam, j, k, l = v
        if fam == "s" and (j, k) == (1, 0):
            rule[v] = SuperPoly.var(v) + SuperPoly.var(s_var(1, 2, l + 1)) * direction
    r, d = cls.kclass
    rep = substitute(cls.rep, rule) if rule else cls.rep
    return HomologyClass((r, d + direction * r), rep, gauge=cls.gauge,
                         extrapolated=cls.extrapolated)


def fourier_mukai(cls: HomologyClass, g: int = 1) -> HomologyClass:
    """The elliptic-curve autoequivalence pushforward: (r,d) -> (d,-r)."""
    if g != 1:
        raise ValueError("the transform exists only at genus 1")
    if cls.is_pair():
        raise ValueError("implemented for sheaf classes")
    rule = {}
    for v in cls.rep.variables():
        fam, j, k, l = v
        if fam != "s":
            raise ValueError("sheaf variables only")
        if (j, k) == (1, 2):
            rule[v] = SuperPoly.var(s_var(1, 0, l - 1))
        elif (j, k) == (2, 1):
            rule[v] = SuperPoly.var(s_var(1, 1, l))
        elif (j, k) == (1, 1):
            rule[v] = -SuperPoly.var(s_var(2, 1, l))
        elif (j, k) == (1, 0):
            rule[v] = -SuperPoly.var(s_var(1, 2, l + 1))
    r, d = cls.kclass
    return HomologyClass((d, -r), substitute(cls.rep, rule), gauge="raw")


# -- intersection pairings -----------------------------------------------------

def _alpha_weight(l: int) -> SuperPoly:
    return SuperPoly.var(alpha_var(l + 1))


def pairing(g: int, r: int, d: int, m: dict[int, int] | None = None,
            p: dict[tuple[int, int], int] | None = None,
            alpha: dict[int, Fraction] | None = None,
            fixed_det: bool = False):
    """Intersection pairing of the displayed residue formula.

    m[l] counts S_{1,0,l} insertions (l >= 2); p[(j, l)] in {0,1} flags odd
    S_{j,1,l} insertions; the exponential weight carries formal scalars
    alpha_l (one per level l >= 2) unless numeric values are supplied.
    Returns a polynomial in the alpha scalars (a SuperPoly), or a Fraction
    when alpha is given.  The fixed-determinant variant multiplies in the
    full odd top class, which removes the odd sigma content (r^{g-1} 2...):
    implemented via the displayed simpler formula when p is empty.
    """
    m = {l: k for l, k in (m or {}).items() if k}
    p = {jl: v for jl, v in (p or {}).items() if v}
    if any(l < 2 for l in m) or any(v not in (0, 1) for v in p.values()):
        raise ValueError("insertions: S_{1,0,l} needs l >= 2; odd flags are 0/1")
    if fixed_det and p:
        raise ValueError("fixed-determinant pairings take no explicit odd insertions")
    value = _pairing_alpha_poly_frozen(g, r, d, tuple(sorted(m.items())),
                                      tuple(sorted(p.items())), fixed_det)
    if alpha is None:
        return value
    rule = {}
    for v in value.variables():
        fam, j, k, l = v
        rule[v] = Fraction(alpha.get(l, 0))
    return substitute(value, rule).coefficient(())


@lru_cache(maxsize=None)
def _pairing_alpha_poly_frozen(g: int, r: int, d: int, m_items: tuple,
                               p_items: tuple, fixed_det: bool) -> SuperPoly:
    return _pairing_alpha_poly(g, r, d, dict(m_items), dict(p_items), fixed_det)


def _pairing_alpha_poly(g: int, r: int, d: int, m: dict[int, int],
                        p: dict[tuple[int, int], int], fixed_det: bool) -> SuperPoly:
    if r < 1:
        raise ValueError("needs r >= 1")
    sign = _sheaf_prefactor_sign(g, r, d)
    # the sigma-tail factors produce the (-alpha)^{rg}-type weights themselves;
    # the fixed-determinant variant is the full odd insertion at level 1, with
    # the adjunction sign between the ordered derivative product defining the
    # fixed-determinant class and the sorted insertion monomial
    pref = SuperPoly.scalar(Fraction(sign, r))
    if fixed_det:
        pref = pref * _sign(g * (g + 1) // 2)
    apex = [floor((i + 1) * d / r) - floor(i * d / r) for i in range(r)]
    if r == 1:
        # no residue variables: evaluate the zero-dimensional integrand
        if m or any(l != 1 for (_, l) in p):
            return SuperPoly.zero()
        eff_p = dict(p)
        if fixed_det:
            for j in range(1, 2 * g + 1):
                eff_p[(j, 1)] = 1
        result = _odd_insertion_sum_rank1(g, eff_p)
        return pref * result if result else SuperPoly.zero()
    vars = _zvars(r)
    ztil = [_ztilde(r, i) for i in range(r)]

    def mono_power_factor(l, k):
        def build(caps):
            s = Series(vars)
            fl = 1
            for t in range(2, l + 1):
                fl *= t
            for i in range(r):
                s += power_linear_form(vars, ztil[i], l, caps).scale(Fraction(1, fl))
            out = Series.const(vars, 1)
            for _ in range(k):
                out = out.mul(s, caps)
            return out
        return Factor(build, name=f"S(1,0,{l})^{k}")

    def weight_exp_factor():
        def build(caps):
            lmax = sum(max(c, 0) for c in caps.values()) + 1
            x = Series(vars)
            for i in range(r):
                if not apex[i]:
                    continue
                fl = 1
                for l in range(1, lmax + 1):
                    fl *= l
                    x += power_linear_form(vars, ztil[i], l, caps).scale(
                        Fraction(apex[i], fl)).map_poly(lambda q, w=_alpha_weight(l): q * w)
            return exp_series(x, caps)
        return Factor(build, name="weight-exp")

    base = _difference_factors(vars, g, r)
    base.append(weight_exp_factor())
    for l, k in m.items():
        base.append(mono_power_factor(l, k))

    total = SuperPoly.zero()
    for subset in _admissible_subsets(r, d):
        coeff = Fraction((-1) ** len(subset), len(subset) + 1)
        recips = [
            _recip_factor(vars, r, i, _alpha_weight, alpha_var(2))
            for i in range(1, r) if i not in subset
        ]
        for assign_sign, assign_factor in _odd_insertion_factors(vars, g, r, p, ztil, fixed_det):
            factors = base + recips + [assign_factor]
            total += pipeline_residue(vars, factors) * (coeff * assign_sign)
    return pref * total


def _sigma_tail(vars, ztil_i, power: int):
    """(-sum_{l>=0} ztilde^l / l! alpha_{l+2})^power as a series builder."""
    def build(caps):
        lmax = sum(max(c, 0) for c in caps.values()) + 1
        s = Series.const(vars, -SuperPoly.var(alpha_var(2)))
        fl = 1
        for l in range(1, lmax + 1):
            fl *= l
            s += power_linear_form(vars, ztil_i, l, caps).scale(Fraction(-1, fl)).map_poly(
                lambda q, w=SuperPoly.var(alpha_var(l + 2)): q * w)
        out = Series.const(vars, 1)
        for _ in range(power):
            out = out.mul(s, caps)
        return out
    return build


def _odd_insertion_factors(vars, g: int, r: int, p: dict[tuple[int, int], int],
                           ztil, fixed_det: bool):
    """Enumerate odd-insertion assignments: (sign, combined series factor).

    Implements the paired-index constraint and the permutation sign
    intertwining the two total orders on the insertion set.
    """
    effective_p = dict(p)
    if fixed_det:
        for j in range(1, 2 * g + 1):
            effective_p[(j, 1)] = 1

    slots = sorted(effective_p)  # lexicographic = the first total order
    groups: dict[int, dict[str, list[int]]] = {}
    for (j, l) in slots:
        jj = j if j <= g else j - g
        side = "lo" if j <= g else "hi"
        groups.setdefault(jj, {"lo": [], "hi": []})[side].append(l)
    for jj, sides in groups.items():
        if len(sides["lo"]) != len(sides["hi"]):
            return  # unmatched odd insertions pair to zero

    def gen_assignments():
        # for each j-group: bijection between lo/hi levels plus a distinct
        # slot index per matched pair (distinct within the group)
        per_group = []
        for jj in sorted(groups):
            lo = groups[jj]["lo"]
            hi = groups[jj]["hi"]
            opts = []
            for perm in itertools.permutations(hi):
                for idxs in itertools.permutations(range(r), len(lo)):
                    opts.append((lo, perm, idxs))
            per_group.append((jj, opts))
        for choice in itertools.product(*[o for _, o in per_group]):
            yield {jj: ch for (jj, _), ch in zip(per_group, choice)}

    if not slots:
        def build(caps):
            out = Series.const(vars, 1)
            for i in range(r):
                out = out.mul(_sigma_tail(vars, ztil[i], g)(caps), caps)
            return out
        yield Fraction(1), Factor(build, name="sigma-tails")
        return

    for assignment in gen_assignments():
        i_of: dict[tuple[int, int], int] = {}
        used: dict[int, int] = {}
        ok = True
        for jj, (lo, hi_perm, idxs) in assignment.items():
            if len(set(idxs)) != len(idxs):
                ok = False
                break
            for lvl_lo, lvl_hi, i in zip(lo, hi_perm, idxs):
                i_of[(jj, lvl_lo)] = i
                i_of[(jj + g, lvl_hi)] = i
                used[i] = used.get(i, 0) + 1
        if not ok or any(c > g for c in used.values()):
            continue
        # the second total order: by slot index, then j mod g, then j <= g first;
        # the overall insertion sign also carries the dual-pairing factor
        # (-1)^{t(t-1)/2} for t odd insertions (fixed by the cross-check oracle)
        def key2(slot):
            j, l = slot
            return (i_of[slot], j % g, 0 if j <= g else 1)
        order2 = sorted(slots, key=key2)
        t = len(slots)
        sign = _permutation_sign(slots, order2) * ((-1) ** (t * (t - 1) // 2))

        def build(caps, i_of=dict(i_of), used=dict(used)):
            out = Series.const(vars, 1)
            for (j, l), i in i_of.items():
                fl = 1
                for t in range(2, l):
                    fl *= t
                out = out.mul(power_linear_form(vars, ztil[i], l - 1, caps)
                              .scale(Fraction(1, fl)), caps)
            for i in range(r):
                out = out.mul(_sigma_tail(vars, ztil[i], g - used.get(i, 0))(caps), caps)
            return out
        yield sign, Factor(build, name="odd-insertions")


def _permutation_sign(order1, order2) -> Fraction:
    pos = {s: i for i, s in enumerate(order2)}
    perm = [pos[s] for s in order1]
    inv = sum(1 for a in range(len(perm)) for b in range(a + 1, len(perm))
              if perm[a] > perm[b])
    return Fraction((-1) ** inv)


def _odd_insertion_sum_rank1(g: int, p: dict[tuple[int, int], int]) -> SuperPoly:
    slots = sorted(p)
    groups: dict[int, dict[str, int]] = {}
    for (j, l) in slots:
        if l != 1:
            return SuperPoly.zero()
        jj = j if j <= g else j - g
        side = "lo" if j <= g else "hi"
        groups.setdefault(jj, {"lo": 0, "hi": 0})[side] += 1
    e = 0
    for jj, sides in groups.items():
        if sides["lo"] != sides["hi"]:
            return SuperPoly.zero()
        e += sides["lo"]
    order2 = sorted(slots, key=lambda s: (0, s[0] % g, 0 if s[0] <= g else 1))
    t = len(slots)
    sign = _permutation_sign(slots, order2) * ((-1) ** (t * (t - 1) // 2))
    return (SuperPoly.var(alpha_var(2)) * (-1)) ** (g - e) * sign


def pairing_rank2(g: int, d: int, m: dict[int, int] | None = None,
                  fixed_det: bool = False) -> Fraction:
    """Closed Bernoulli-polynomial value of the rank-2 pairing.

    The insertion monomial is prod S_{1,0,l}^{m_l} times the power of
    S_{1,2,2} fixed by the degree balance (4g-3-h resp. 3g-3-h).
    """
    m = {l: k for l, k in (m or {}).items() if k}
    h = sum(l * k for l, k in m.items())
    if h > 2 * g - 2 or any(l % 2 for l in m):
        return Fraction(0)
    total_m = sum(m.values())
    frac = Fraction(1, 2) if d % 2 else Fraction(0)
    lfact = 1
    for l, k in m.items():
        f = 1
        for t in range(2, l + 1):
            f *= t
        lfact *= f ** k
    bern = bernoulli_polynomial(2 * g - 2 - h, frac)
    if fixed_det:
        top = 3 * g - 3 - h
        num = Fraction((-1) ** (d - 1)) * _fact(top)
        den = Fraction(2) ** (h - total_m + 1 - g) * lfact * _fact(2 * g - 2 - h)
    else:
        top = 4 * g - 3 - h
        num = Fraction((-1) ** (g + d - 1)) * _fact(top)
        den = Fraction(2) ** (h - total_m + 1) * lfact * _fact(2 * g - 2 - h)
    return num / den * bern


def _fact(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def pairing_via_class(g: int, r: int, d: int, m: dict[int, int] | None = None,
                      p: dict[tuple[int, int], int] | None = None,
                      fixed_det: bool = False) -> SuperPoly:
    """Independent pairing oracle: dual-pair monomials against the class.

    Pairs the gauge-fixed cohomology image of each insertion monomial times
    every S_{1,2,l} power combination against the computed invariant class,
    returning the same alpha polynomial as :func:`pairing`.
    """
    cls = fixed_det_class(g, r, d) if fixed_det else sheaf_class(g, r, d)
    rep = cls.rep
    m = {l: k for l, k in (m or {}).items() if k}
    p = {jl: v for jl, v in (p or {}).items() if v}
    base_factors = [(s_var(1, 0, l), k) for l, k in m.items()]
    base_factors += [(s_var(j, 1, l), 1) for (j, l) in sorted(p)]
    base_deg = sum(2 * l * k for l, k in m.items()) + sum(2 * l - 1 for (_, l) in p)
    target = fd_class_degree(g, r) if fixed_det else class_degree(g, r)
    need = target - base_deg
    out = SuperPoly.zero()
    if need < 0:
        return out
    levels = list(range(2, need // 2 + 2))
    for combo in _weak_compositions(need, levels):
        factors = list(base_factors)
        weight = SuperPoly.scalar(1)
        for l, k in combo.items():
            if not k:
                continue
            factors.append((s_var(1, 2, l), k))
            weight = weight * SuperPoly.var(alpha_var(l), k) * Fraction(1, _fact(k))
        coh = fix_gauge_dual(SuperPoly.monomial(factors), (r, d))
        val = Fraction(0)
        for mono, c in coh.terms.items():
            val += c * dual_pair(mono, rep)
        if val:
            out += weight * val
    return out


def _weak_compositions(total: int, levels: list[int]):
    """All {level: count} with sum (2l-2)*count = total."""
    def rec(idx, remaining, acc):
        if remaining == 0:
            yield dict(acc)
            return
        if idx >= len(levels):
            return
        l = levels[idx]
        step = 2 * l - 2
        top = remaining // step if step else 0
        for k in range(top, -1, -1):
            acc[l] = k
            yield from rec(idx + 1, remaining - k * step, acc)
        acc.pop(l, None)
    yield from rec(0, total, {})


# -- symplectic volumes ---------------------------------------------------------

@lru_cache(maxsize=None)
def volume(g: int, r: int, d: int) -> Fraction:
    """Pairing of exp(-S_{1,2,2}) against the fixed-determinant class."""
    if r < 1:
        raise ValueError("needs r >= 1")
    if r == 1:
        return Fraction(1)
    vars = _zvars(r)
    apex_frac = [Fraction(floor((i + 1) * d / r) - floor(i * d / r)) - Fraction(d, r)
                 for i in range(r)]
    numeric = lambda l: SuperPoly.scalar(-1) if l == 1 else SuperPoly.zero()
    base = _difference_factors(vars, g, r)

    def exp_factor(caps):
        coeffs = {}
        for i in range(1, r):
            c = -apex_frac[i]
            if c:
                coeffs[f"z{i}"] = c
        if not coeffs:
            return Series.const(vars, 1)
        return exp_series(linear_series(vars, coeffs), caps)

    base.append(Factor(exp_factor, name="exp(alpha sum d~ z)"))
    total = Fraction(0)
    for subset in _admissible_subsets(r, d):
        coeff = Fraction((-1) ** len(subset), len(subset) + 1)
        factors = list(base)
        for i in range(1, r):
            if i not in subset:
                factors.append(_recip_factor(vars, r, i, numeric, None))
        total += pipeline_residue(vars, factors).coefficient(()) * coeff
    sign = _sheaf_prefactor_sign(g, r, d)
    return total * sign * r ** (g - 1)


@lru_cache(maxsize=None)
def volume_jk(g: int, r: int, d: int) -> Fraction:
    """The change-of-variables residue form of the volume (coprime r, d)."""
    if r < 1:
        raise ValueError("needs r >= 1")
    if gcd(r, d) != 1:
        raise ValueError("the y-variable form needs gcd(r, d) = 1")
    if r == 1:
        return Fraction(1)
    # y_i = z_{i-1} - z_i; innermost-first order y_{r-1}, ..., y_1
    vars = tuple(f"y{i}" for i in range(r - 1, 0, -1))
    apex_frac = [Fraction(floor((i + 1) * d / r) - floor(i * d / r)) - Fraction(d, r)
                 for i in range(r)]
    factors = []
    p = 2 * g - 2
    for i in range(0, r - 1):
        for j in range(i + 1, r):
            # z_i - z_j = y_{i+1} + ... + y_j; leading variable is y_{i+1}
            coeffs = {f"y{k}": Fraction(1) for k in range(i + 1, j + 1)}
            coupled = tuple(f"y{k}" for k in range(i + 2, j + 1))
            if p > 0:
                factors.append(Factor(
                    (lambda caps, c=coeffs: invert_linear_form(vars, c, p, caps)),
                    poles={f"y{i+1}": (p, coupled, 0)}, name=f"(z{i}-z{j})^-{p}"))
            elif p < 0:
                factors.append(Factor(
                    (lambda caps, c=coeffs: power_linear_form(vars, c, -p, caps)),
                    name=f"(z{i}-z{j})^{p}"))
    one = lambda l: SuperPoly.scalar(1) if l == 1 else SuperPoly.zero()
    for i in range(1, r):
        # 1/(exp(y_i) - 1) = -1/(1 - exp(y_i))
        factors.append(Factor(
            (lambda caps, v=f"y{i}": one_minus_exp_reciprocal(
                vars, {v: Fraction(1)}, {}, one, None, caps).scale(-1)),
            poles={f"y{i}": (1, (), 0)}, name=f"recip-y{i}"))

    def exp_factor(caps):
        # -sum_i d~_i z_i = sum_k y_k * sum_{i>=k} d~_i under z_i = -(y_1+..+y_i)
        coeffs = {}
        for k in range(1, r):
            c = sum(apex_frac[i] for i in range(k, r))
            if c:
                coeffs[f"y{k}"] = c
        if not coeffs:
            return Series.const(vars, 1)
        return exp_series(linear_series(vars, coeffs), caps)

    factors.append(Factor(exp_factor, name="exp(-sum d~ z)"))
    total = pipeline_residue(vars, factors).coefficient(())
    sign = _sign((g - 1) * r * (r - 1) // 2)
    return total * sign * r ** (g - 1)
