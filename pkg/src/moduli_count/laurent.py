"""Truncated multivariate Laurent series over supercommutative coefficients.

Series live in an ordered tuple of auxiliary variables, listed innermost
(smallest magnitude) first; the expansion region is |v_1| < |v_2| < ... for
the listed order, with any frozen variable treated as 0.  Every auxiliary
variable has degree -2, so a homogeneous series satisfies

    poly-degree - 2 * (sum of auxiliary exponents) = const.

Residues are taken innermost-first.  Truncation is handled by explicit
per-variable exponent caps; :func:`pipeline_residue` computes sound caps for
a product of factors from their declared pole structure (an ascending pass:
a pole variable's depth extends by the in-factor caps of the smaller
variables it is expanded against) and folds the product with per-step caps so
that every reported coefficient is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Iterable, Mapping, Sequence

from .exact import bernoulli_number
from .superalg import (
    SuperPoly,
    Var,
    invert_unit_monomial,
    mono_degree,
)

ExpVec = tuple[int, ...]
Caps = Mapping[str, int]


def _fused_poly_products(pairs: list) -> SuperPoly:
    """sum of p1*p2 over the pairs, with one shared integer accumulator."""
    from math import gcd
    from .superalg import _mono_mul
    scaled = []
    den_total = 1
    for p1, p2 in pairs:
        den1 = 1
        for c in p1.terms.values():
            den1 = den1 * c.denominator // gcd(den1, c.denominator)
        den2 = 1
        for c in p2.terms.values():
            den2 = den2 * c.denominator // gcd(den2, c.denominator)
        den = den1 * den2
        scaled.append((p1, den1, p2, den2, den))
        den_total = den_total * den // gcd(den_total, den)
    out: dict = {}
    get = out.get
    for p1, den1, p2, den2, den in scaled:
        boost = den_total // den
        left = [(m, c.numerator * (den1 // c.denominator)) for m, c in p1.terms.items()]
        right = [(m, boost * c.numerator * (den2 // c.denominator)) for m, c in p2.terms.items()]
        for m1, n1 in left:
            for m2, n2 in right:
                sign, mono = _mono_mul(m1, m2)
                if sign == 0:
                    continue
                prod = n1 * n2 if sign > 0 else -n1 * n2
                s = get(mono)
                out[mono] = prod if s is None else s + prod
    res = SuperPoly()
    res.terms = {m: Fraction(n, den_total) for m, n in out.items() if n}
    return res


class Series:
    """Laurent series: map from exponent vectors to SuperPoly coefficients."""

    __slots__ = ("vars", "terms")

    def __init__(self, vars: Sequence[str], terms: Mapping[ExpVec, SuperPoly] | None = None):
        self.vars = tuple(vars)
        self.terms: dict[ExpVec, SuperPoly] = {}
        if terms:
            for e, p in terms.items():
                if p:
                    self.terms[tuple(e)] = p

    # -- constructors ---------------------------------------------------

    @staticmethod
    def const(vars: Sequence[str], poly: SuperPoly | Fraction | int) -> "Series":
        if not isinstance(poly, SuperPoly):
            poly = SuperPoly.scalar(poly)
        zero = (0,) * len(tuple(vars))
        return Series(vars, {zero: poly} if poly else {})

    @staticmethod
    def monomial(vars: Sequence[str], exps: Mapping[str, int],
                 poly: SuperPoly | Fraction | int = 1) -> "Series":
        vars = tuple(vars)
        if any(k not in vars for k in exps):
            raise ValueError(f"unknown variable in {tuple(exps)!r} for {vars!r}")
        if not isinstance(poly, SuperPoly):
            poly = SuperPoly.scalar(poly)
        vec = tuple(exps.get(v, 0) for v in vars)
        return Series(vars, {vec: poly} if poly else {})

    # -- basic algebra ----------------------------------------------------

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Series) and self.vars == other.vars and self.terms == other.terms

    def __add__(self, other: "Series") -> "Series":
        assert self.vars == other.vars
        out = dict(self.terms)
        for e, p in other.terms.items():
            s = out.get(e)
            s = p if s is None else s + p
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        res = Series(self.vars)
        res.terms = out
        return res

    def __neg__(self) -> "Series":
        res = Series(self.vars)
        res.terms = {e: -p for e, p in self.terms.items()}
        return res

    def __sub__(self, other: "Series") -> "Series":
        return self + (-other)

    def scale(self, c: Fraction | int | SuperPoly) -> "Series":
        res = Series(self.vars)
        for e, p in self.terms.items():
            q = p * c
            if q:
                res.terms[e] = q
        return res

    def mul(self, other: "Series", caps: Caps | None = None) -> "Series":
        assert self.vars == other.vars
        capvec = None if caps is None else tuple(caps.get(v, 10 ** 9) for v in self.vars)
        slots: dict[ExpVec, list] = {}
        for e1, p1 in self.terms.items():
            for e2, p2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                if capvec is not None and any(x > c for x, c in zip(e, capvec)):
                    continue
                slots.setdefault(e, []).append((p1, p2))
        res = Series(self.vars)
        for e, pairs in slots.items():
            q = _fused_poly_products(pairs)
            if q:
                res.terms[e] = q
        return res

    def truncate(self, caps: Caps) -> "Series":
        capvec = tuple(caps.get(v, 10 ** 9) for v in self.vars)
        res = Series(self.vars)
        for e, p in self.terms.items():
            if all(x <= c for x, c in zip(e, capvec)):
                res.terms[e] = p
        return res

    def shift(self, exps: Mapping[str, int]) -> "Series":
        vec = tuple(exps.get(v, 0) for v in self.vars)
        res = Series(self.vars)
        res.terms = {tuple(a + b for a, b in zip(e, vec)): p for e, p in self.terms.items()}
        return res

    def map_poly(self, f: Callable[[SuperPoly], SuperPoly]) -> "Series":
        res = Series(self.vars)
        for e, p in self.terms.items():
            q = f(p)
            if q:
                res.terms[e] = q
        return res

    # -- extraction -------------------------------------------------------

    def coeff(self, exps: Mapping[str, int] | ExpVec) -> SuperPoly:
        if not isinstance(exps, tuple):
            exps = tuple(exps.get(v, 0) for v in self.vars)
        return self.terms.get(exps, SuperPoly.zero())

    def residue(self, var: str) -> "Series":
        """Coefficient of var^{-1}; var must be the innermost remaining one."""
        if not self.vars or self.vars[0] != var:
            raise ValueError(f"residues must be taken innermost-first; next is {self.vars[:1]}")
        res = Series(self.vars[1:])
        for e, p in self.terms.items():
            if e[0] == -1:
                res.terms[e[1:]] = p
        return res

    def min_exponents(self) -> dict[str, int]:
        out = {}
        for i, v in enumerate(self.vars):
            exps = [e[i] for e in self.terms]
            out[v] = min(exps) if exps else 0
        return out

    def is_homogeneous(self) -> bool:
        degs = set()
        for e, p in self.terms.items():
            aux = sum(e)
            degs.update(mono_degree(m) - 2 * aux for m in p.terms)
        return len(degs) <= 1

    def __repr__(self) -> str:
        bits = []
        for e in sorted(self.terms):
            mono = " ".join(f"{v}^{x}" for v, x in zip(self.vars, e) if x)
            bits.append(f"[{mono or '1'}] * ({self.terms[e]!r})")
        return " + ".join(bits) or "0"


# -- linear forms --------------------------------------------------------

LinForm = Mapping[str, Fraction]


def _lin_sub(a: LinForm, b: LinForm) -> dict[str, Fraction]:
    out = {k: Fraction(v) for k, v in a.items()}
    for k, v in b.items():
        out[k] = out.get(k, Fraction(0)) - v
    return {k: v for k, v in out.items() if v}


def linear_series(vars: Sequence[str], coeffs: LinForm) -> Series:
    res = Series(vars)
    for v, c in coeffs.items():
        if c:
            res += Series.monomial(vars, {v: 1}, SuperPoly.scalar(c))
    return res


def power_linear_form(vars: Sequence[str], coeffs: LinForm, power: int,
                      caps: Caps | None = None) -> Series:
    """(sum_v c_v v)^power for power >= 0, truncated by caps."""
    if power < 0:
        raise ValueError("power_linear_form needs power >= 0")
    out = Series.const(vars, 1)
    base = linear_series(vars, coeffs)
    for _ in range(power):
        out = out.mul(base, caps)
    return out


def invert_linear_form(vars: Sequence[str], coeffs: LinForm, power: int,
                       caps: Caps) -> Series:
    """1/(sum_v c_v v)^power expanded against the largest-magnitude variable.

    With leading variable L (the latest listed with a nonzero coefficient)
    and remainder R, this is (c_L L)^{-p} sum_k C(p-1+k, k) (-R/(c_L L))^k.
    """
    if power < 1:
        raise ValueError("invert_linear_form needs power >= 1")
    vars = tuple(vars)
    support = [v for v in vars if coeffs.get(v)]
    if not support:
        raise ValueError("cannot invert the zero form")
    lead = support[-1]
    c_lead = Fraction(coeffs[lead])
    rest = {v: Fraction(c) for v, c in coeffs.items() if v != lead and c}
    pref = Series.monomial(vars, {lead: -power}, SuperPoly.scalar(c_lead ** -power))
    if not rest:
        return pref
    # ratio = -R / (c_L * L); accumulate sum_k C(p-1+k, k) ratio^k
    ratio = linear_series(vars, {v: -c / c_lead for v, c in rest.items()}).shift({lead: -1})
    total = Series.const(vars, 1)
    term = Series.const(vars, 1)
    k = 0
    while True:
        k += 1
        term = term.mul(ratio, caps)
        if not term:
            break
        total += term.scale(comb(power - 1 + k, k))
    return pref.mul(total, caps)


def expand_inverse_difference(vars: Sequence[str], vi: str | None, vj: str,
                              power: int, caps: Caps) -> Series:
    """1/(v_i - v_j)^power with v_i inner (smaller) than v_j; vi=None means 0."""
    vars = tuple(vars)
    if vi is not None:
        if vars.index(vi) >= vars.index(vj):
            raise ValueError("expansion requires the first variable to be the smaller one")
        coeffs = {vi: Fraction(1), vj: Fraction(-1)}
    else:
        coeffs = {vj: Fraction(-1)}
    return invert_linear_form(vars, coeffs, power, caps)


def exp_series(x: Series, caps: Caps) -> Series:
    """exp of a series whose every term has positive total auxiliary degree."""
    for e in x.terms:
        if sum(e) <= 0:
            raise ValueError("exp needs strictly positive truncation weight on every term")
    x = x.truncate(caps)
    total = Series.const(x.vars, 1)
    term = Series.const(x.vars, 1)
    n = 0
    while True:
        n += 1
        term = term.mul(x, caps).scale(Fraction(1, n))
        if not term:
            break
        total += term
    return total


def invert_unit_led(s: Series, unit: Var | None, caps: Caps) -> Series:
    """Invert c*unit^k*(1 + n) where n has strictly positive auxiliary degree.

    The auxiliary-degree-zero part must be a single monomial in the declared
    even unit (or a scalar).  Satisfies s * result = 1 up to the caps.
    """
    zero = (0,) * len(s.vars)
    lead = s.terms.get(zero)
    if lead is None:
        raise ValueError("leading part is not a unit multiple")
    lead_inv = invert_unit_monomial(lead, unit)
    rest = Series(s.vars, {e: p for e, p in s.terms.items() if e != zero})
    if any(sum(e) <= 0 for e in rest.terms):
        raise ValueError("non-leading terms must have positive auxiliary degree")
    ratio = rest.map_poly(lambda p: p * lead_inv).scale(-1).truncate(caps)
    total = Series.const(s.vars, 1)
    term = Series.const(s.vars, 1)
    while True:
        term = term.mul(ratio, caps)
        if not term:
            break
        total += term
    return total.map_poly(lambda p: p * lead_inv)


def one_minus_exp_reciprocal(vars: Sequence[str], za: LinForm, zb: LinForm,
                             weight: Callable[[int], SuperPoly],
                             unit: Var | None, caps: Caps,
                             scale: Fraction | int = 1) -> Series:
    """1/(1 - exp(scale * sum_{l>=1} (za^l - zb^l)/l! * weight(l))).

    za, zb are linear forms whose difference L = scale*(za - zb) is the
    divisor; the quotient P with X = L*P is assembled from the polynomial
    identity (za^l - zb^l)/(za - zb) = sum_{a+b=l-1} za^a zb^b, so that all
    of P's exponents are nonnegative.  Returns -(1/X) sum_n B_n X^n / n!
    with 1/X = invert_linear_form(L) * invert_unit_led(P).
    """
    vars = tuple(vars)
    scale = Fraction(scale)
    divisor = {v: scale * c for v, c in _lin_sub(za, zb).items()}
    support = [v for v in vars if divisor.get(v)]
    if not support:
        raise ValueError("the two linear forms coincide")
    lead = support[-1]
    # the nonnegative-exponent internals must reach above the requested caps
    # by the pole depth of the single inverse-linear factor
    bonus = 1 + sum(max(caps.get(v, 0), 0) for v in support if v != lead)
    icaps = {v: max(caps.get(v, 0), 0) + (bonus if v == lead else 0) for v in vars}
    caps, outer_caps = icaps, caps
    l_cap = sum(max(c, 0) for c in caps.values()) + 1
    p_series = Series(vars)
    pow_a = Series.const(vars, 1)   # za^a, truncated
    a_terms: list[Series] = [pow_a]
    sa = linear_series(vars, za)
    for _ in range(l_cap):
        pow_a = pow_a.mul(sa, caps)
        a_terms.append(pow_a)
    pow_b = Series.const(vars, 1)
    b_terms: list[Series] = [pow_b]
    sb = linear_series(vars, zb)
    for _ in range(l_cap):
        pow_b = pow_b.mul(sb, caps)
        b_terms.append(pow_b)
    fact = 1
    for l in range(1, l_cap + 1):
        fact *= l
        w = weight(l)
        if not w:
            continue
        quotient = Series(vars)
        for a in range(l):
            quotient += a_terms[a].mul(b_terms[l - 1 - a], caps)
        p_series += quotient.scale(w * Fraction(1, fact))
    inv_l = invert_linear_form(vars, divisor, 1, caps)
    x_series = linear_series(vars, divisor).mul(p_series, caps)
    inv_x = inv_l.mul(invert_unit_led(p_series, unit, caps), caps)
    total = Series.const(vars, 1)  # sum_n B_n X^n / n!
    xpow = Series.const(vars, 1)
    n = 0
    while True:
        n += 1
        xpow = xpow.mul(x_series, caps).scale(Fraction(1, n))
        if not xpow:
            break
        b = bernoulli_number(n)
        if b:
            total += xpow.scale(b)
    return inv_x.mul(total, caps).scale(-1).truncate(outer_caps)


def geometric_ratio_sum(ratio: Series, caps: Caps) -> Series:
    """sum_{a>=0} ratio^a for a ratio whose powers leave any finite window.

    Every term of ratio must strictly lower some pole variable or raise a
    capped variable, so the sum is finite once truncated; this is the
    window-wise value of the regularized geometric series in the directly
    summable case.
    """
    total = Series.const(ratio.vars, 1)
    term = Series.const(ratio.vars, 1)
    guard = 0
    while True:
        term = term.mul(ratio, caps)
        if not term:
            return total
        total += term
        guard += 1
        if guard > 10000:
            raise RuntimeError("ratio powers do not leave the window")


def operator_exp(zform: LinForm, op: Callable[[SuperPoly], SuperPoly],
                 seed: Series, caps: Caps) -> Series:
    """sum_n (zform^n / n!) op^n(seed), truncated by caps.

    op acts on the SuperPoly coefficients only (it commutes with the
    auxiliary variables).
    """
    total = seed.truncate(caps)
    current = total
    zpow = Series.const(seed.vars, 1)
    n = 0
    while True:
        n += 1
        zpow = zpow.mul(linear_series(seed.vars, zform), caps)
        if not zpow:
            break
        current = current.map_poly(op)
        if not current:
            break
        term = zpow.mul(current, caps).scale(Fraction(1, _factorial(n)))
        if term:
            total += term
    return total


def _factorial(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


# -- pipeline driver -----------------------------------------------------

@dataclass
class Factor:
    """One multiplicand of a residue pipeline.

    poles maps a variable to (order, coupled_smaller_vars, pad): the factor's
    exponent in that variable is bounded below by
    -order - pad - sum of its own caps over the coupled (strictly smaller)
    variables.  build(caps) must return the factor complete below those caps.
    """
    build: Callable[[Caps], Series]
    poles: dict[str, tuple[int, tuple[str, ...], int]] = field(default_factory=dict)
    name: str = ""


def pipeline_residue(vars: Sequence[str], factors: Sequence[Factor],
                     target: Mapping[str, int] | None = None,
                     extra_caps: int = 0) -> SuperPoly:
    """Exact coefficient of prod v^(target_v) in the product of the factors.

    target defaults to -1 in every variable (the iterated residue).
    extra_caps widens every window; the result must not depend on it
    (truncation-refinement stability).
    """
    vars = tuple(vars)
    tgt = {v: -1 for v in vars}
    if target:
        tgt.update(target)
    caps: list[dict[str, int]] = [{} for _ in factors]
    lo: list[dict[str, int]] = [{} for _ in factors]
    for v in vars:  # ascending: innermost first
        for i, f in enumerate(factors):
            pole = f.poles.get(v)
            if pole is None:
                lo[i][v] = 0
            else:
                order, coupled, pad = pole
                lo[i][v] = -order - pad - sum(caps[i][u] for u in coupled)
        total_lo = sum(l[v] for l in lo)
        for i in range(len(factors)):
            caps[i][v] = tgt[v] - (total_lo - lo[i][v]) + extra_caps
    built = [f.build(caps[i]) for i, f in enumerate(factors)]
    # fold with per-step windows: what later factors can still pull down
    suffix = [{v: 0 for v in vars} for _ in range(len(factors) + 1)]
    for i in range(len(factors) - 1, -1, -1):
        suffix[i] = {v: suffix[i + 1][v] + lo[i][v] for v in vars}
    prod = Series.const(vars, 1)
    for i, s in enumerate(built):
        step_caps = {v: tgt[v] - suffix[i + 1][v] + extra_caps for v in vars}
        prod = prod.mul(s, step_caps)
        if not prod:
            break
    return prod.coeff(tgt)
