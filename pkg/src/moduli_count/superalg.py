"""Supercommutative polynomial algebra over exact rationals.

Variables come in three families:

* ``("s", j, k, l)`` -- sheaf-side generators, cohomological index
  k in {0, 1, 2}, level l > k/2, degree 2l - k, parity k mod 2.  For k = 0, 2
  only j = 1 occurs; for k = 1 the index j runs over 1..2g.
* ``("+", 1, 0, l)`` -- pair-side generators, l >= 1, degree 2l, even.
* ``("a", 1, 0, l)`` -- formal even scalars of degree 2l - 2 (the exponential
  weights used when extracting intersection pairings).

A primed copy of each family (family tag suffixed with ``'``) exists for the
internal two-argument stage of the vertex operation.

Monomials are kept in a canonical ascending order (by level, then
cohomological index, then family, then j); odd variables are square-zero and
all Koszul signs are normalized at construction.  A polynomial may be
localized at a single declared even "unit" variable, which is then the only
variable allowed to carry negative exponents.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Callable, Iterable, Mapping, Union

from .exact import rational_from_str, rational_to_str

Var = tuple[str, int, int, int]
Mono = tuple[tuple[Var, int], ...]

_FAM_RANK = {"s": 0, "+": 1, "a": 2, "s'": 3, "+'": 4, "a'": 5}


def s_var(j: int, k: int, l: int) -> Var:
    if k not in (0, 1, 2):
        raise ValueError("cohomological index must be 0, 1 or 2")
    if k in (0, 2) and j != 1:
        raise ValueError("even sheaf variables have j = 1")
    if 2 * l <= k:
        raise ValueError("level must satisfy l > k/2")
    return ("s", j, k, l)


def pair_var(l: int) -> Var:
    if l < 1:
        raise ValueError("pair level must be >= 1")
    return ("+", 1, 0, l)


def alpha_var(l: int) -> Var:
    if l < 2:
        raise ValueError("scalar weights start at level 2")
    return ("a", 1, 0, l)


def prime_var(v: Var) -> Var:
    fam, j, k, l = v
    if fam.endswith("'"):
        raise ValueError("variable already primed")
    return (fam + "'", j, k, l)


def unprime_var(v: Var) -> Var:
    fam, j, k, l = v
    return (fam.rstrip("'"), j, k, l)


def var_key(v: Var) -> tuple[int, int, int, int]:
    fam, j, k, l = v
    return (l, k, _FAM_RANK[fam], j)


def var_degree(v: Var) -> int:
    fam, j, k, l = v
    if fam.startswith("s"):
        return 2 * l - k
    if fam.startswith("+"):
        return 2 * l
    return 2 * l - 2  # scalar weight standing in for an s(1,2,l)


def var_is_odd(v: Var) -> bool:
    return v[2] % 2 == 1


def normalize_monomial(factors: Iterable[tuple[Var, int]]) -> tuple[Fraction, Mono]:
    """Sort variable factors into canonical order, tracking the Koszul sign.

    Returns ``(sign, monomial)``; the sign is 0 (with an empty monomial) when
    an odd variable repeats.
    """
    evens: dict[Var, int] = {}
    odds: list[Var] = []
    sign = 1
    for v, e in factors:
        if e == 0:
            continue
        if var_is_odd(v):
            if e != 1:
                return Fraction(0), ()
            # insertion sort, counting transpositions past later odd factors
            key = var_key(v)
            pos = len(odds)
            while pos > 0 and var_key(odds[pos - 1]) > key:
                pos -= 1
            if pos > 0 and var_key(odds[pos - 1]) == key:
                return Fraction(0), ()
            sign *= (-1) ** (len(odds) - pos)
            odds.insert(pos, v)
        else:
            # negative exponents are legitimate here (localized unit)
            evens[v] = evens.get(v, 0) + e
            if evens[v] == 0:
                del evens[v]
    items = [(v, e) for v, e in evens.items()] + [(v, 1) for v in odds]
    items.sort(key=lambda t: var_key(t[0]))
    return Fraction(sign), tuple(items)


_mono_mul_cache: dict[tuple[Mono, Mono], tuple[int, Mono | None]] = {}


def _mono_mul(m1: Mono, m2: Mono) -> tuple[int, Mono | None]:
    """Merge two canonical monomials; sign counts odd transpositions."""
    key = (m1, m2)
    hit = _mono_mul_cache.get(key)
    if hit is not None:
        return hit
    odds1 = [v for v, e in m1 if var_is_odd(v)]
    odds2 = [v for v, e in m2 if var_is_odd(v)]
    sign = 1
    if odds1 and odds2:
        keys1 = [var_key(v) for v in odds1]
        keys2 = [var_key(v) for v in odds2]
        if set(keys1) & set(keys2):
            _mono_mul_cache[key] = (0, None)
            return 0, None
        # each odds2 element hops over the odds1 elements with larger key
        inv = 0
        for k2 in keys2:
            inv += sum(1 for k1 in keys1 if k1 > k2)
        sign = (-1) ** inv
    merged: dict[Var, int] = dict(m1)
    for v, e in m2:
        ne = merged.get(v, 0) + e
        if ne:
            merged[v] = ne
        else:
            del merged[v]
    items = sorted(merged.items(), key=lambda t: var_key(t[0]))
    out = (sign, tuple(items))
    _mono_mul_cache[key] = out
    return out


Coeffable = Union["SuperPoly", Fraction, int]


class SuperPoly:
    """Sparse supercommutative polynomial with Fraction coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Mono, Fraction] | None = None):
        self.terms: dict[Mono, Fraction] = {}
        if terms:
            for m, c in terms.items():
                if c:
                    self.terms[m] = Fraction(c)

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero() -> "SuperPoly":
        return SuperPoly()

    @staticmethod
    def scalar(c: Fraction | int) -> "SuperPoly":
        c = Fraction(c)
        return SuperPoly({(): c} if c else {})

    @staticmethod
    def var(v: Var, exp: int = 1) -> "SuperPoly":
        if exp == 0:
            return SuperPoly.scalar(1)
        sign, mono = normalize_monomial([(v, exp)])
        if sign == 0:
            return SuperPoly()
        return SuperPoly({mono: sign})

    @staticmethod
    def monomial(factors: Iterable[tuple[Var, int]], coeff: Fraction | int = 1) -> "SuperPoly":
        sign, mono = normalize_monomial(factors)
        c = sign * Fraction(coeff)
        return SuperPoly({mono: c} if c else {})

    # -- ring structure ------------------------------------------------

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SuperPoly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self == SuperPoly.scalar(other)
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __add__(self, other: Coeffable) -> "SuperPoly":
        other = _coerce(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, Fraction(0)) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        res = SuperPoly()
        res.terms = out
        return res

    __radd__ = __add__

    def __neg__(self) -> "SuperPoly":
        res = SuperPoly()
        res.terms = {m: -c for m, c in self.terms.items()}
        return res

    def __sub__(self, other: Coeffable) -> "SuperPoly":
        return self + (-_coerce(other))

    def __rsub__(self, other: Coeffable) -> "SuperPoly":
        return _coerce(other) + (-self)

    def __mul__(self, other: Coeffable) -> "SuperPoly":
        if isinstance(other, (int, Fraction)):
            c = Fraction(other)
            if not c:
                return SuperPoly()
            res = SuperPoly()
            res.terms = {m: c * v for m, v in self.terms.items()}
            return res
        # integer-scaled kernel: pull out one denominator per operand so the
        # inner loop is pure integer multiply-accumulate
        den1 = 1
        for c in self.terms.values():
            den1 = den1 * c.denominator // gcd(den1, c.denominator)
        den2 = 1
        for c in other.terms.values():
            den2 = den2 * c.denominator // gcd(den2, c.denominator)
        left = [(m, c.numerator * (den1 // c.denominator)) for m, c in self.terms.items()]
        right = [(m, c.numerator * (den2 // c.denominator)) for m, c in other.terms.items()]
        out: dict[Mono, int] = {}
        mono_mul = _mono_mul
        get = out.get
        for m1, n1 in left:
            for m2, n2 in right:
                sign, mono = mono_mul(m1, m2)
                if sign == 0:
                    continue
                prod = n1 * n2 if sign > 0 else -n1 * n2
                s = get(mono)
                out[mono] = prod if s is None else s + prod
        den = den1 * den2
        res = SuperPoly()
        res.terms = {m: Fraction(n, den) for m, n in out.items() if n}
        return res

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "SuperPoly":
        if n < 0:
            raise ValueError("use invert_unit_monomial for negative powers")
        out = SuperPoly.scalar(1)
        base = self
        while n > 0:
            if n & 1:
                out = out * base
            n >>= 1
            if n:
                base = base * base
        return out

    # -- structure queries ----------------------------------------------

    def variables(self) -> set[Var]:
        return {v for m in self.terms for v, _ in m}

    def coefficient(self, mono: Mono) -> Fraction:
        return self.terms.get(mono, Fraction(0))

    def is_homogeneous(self) -> bool:
        degs = {mono_degree(m) for m in self.terms}
        return len(degs) <= 1

    def degree(self) -> int | None:
        """Common degree of a homogeneous polynomial (None for 0)."""
        degs = {mono_degree(m) for m in self.terms}
        if not degs:
            return None
        if len(degs) != 1:
            raise ValueError("polynomial is not homogeneous")
        return degs.pop()

    def parity(self) -> int | None:
        pars = {mono_parity(m) for m in self.terms}
        if not pars:
            return None
        if len(pars) != 1:
            raise ValueError("polynomial has mixed parity")
        return pars.pop()

    def has_negative_exponents(self) -> bool:
        return any(e < 0 for m in self.terms for _, e in m)

    def map_coeff(self, f: Callable[[Fraction], Fraction]) -> "SuperPoly":
        res = SuperPoly()
        for m, c in self.terms.items():
            v = f(c)
            if v:
                res.terms[m] = v
        return res

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for m in sorted(self.terms, key=_mono_sort_key):
            c = self.terms[m]
            factors = "".join(
                f"{fam}({j},{k},{l})" + (f"^{e}" if e != 1 else "")
                for (fam, j, k, l), e in m
            )
            bits.append(f"{rational_to_str(c)}*{factors}" if factors else rational_to_str(c))
        return " + ".join(bits)


def _coerce(x: Coeffable) -> SuperPoly:
    if isinstance(x, SuperPoly):
        return x
    return SuperPoly.scalar(x)


def mono_degree(m: Mono) -> int:
    return sum(var_degree(v) * e for v, e in m)


def mono_parity(m: Mono) -> int:
    return sum(e for v, e in m if var_is_odd(v)) % 2


def _mono_sort_key(m: Mono):
    return (mono_degree(m), tuple((var_key(v), e) for v, e in m))


def derive(p: SuperPoly, v: Var) -> SuperPoly:
    """Graded left derivation d/dv; passing over an odd factor flips signs."""
    odd = var_is_odd(v)
    key = var_key(v)
    out = SuperPoly()
    for m, c in p.terms.items():
        for idx, (w, e) in enumerate(m):
            if w != v:
                continue
            if odd:
                sgn = (-1) ** sum(1 for w2, _ in m[:idx] if var_is_odd(w2))
                rest = m[:idx] + m[idx + 1:]
                out += SuperPoly({rest: c * sgn})
            else:
                if e == 1:
                    rest = m[:idx] + m[idx + 1:]
                else:
                    rest = m[:idx] + ((w, e - 1),) + m[idx + 1:]
                out += SuperPoly({rest: c * e})
            break
    return out


def substitute(p: SuperPoly, rule: Mapping[Var, Coeffable]) -> SuperPoly:
    """Extend a parity-preserving variable assignment to a ring homomorphism."""
    images: dict[Var, SuperPoly] = {}
    for v, img in rule.items():
        img = _coerce(img)
        if var_is_odd(v):
            if any(mono_parity(m) != 1 for m in img.terms):
                raise ValueError(f"parity-violating image for odd variable {v}")
        else:
            if any(mono_parity(m) != 0 for m in img.terms):
                raise ValueError(f"parity-violating image for even variable {v}")
        images[v] = img
    out = SuperPoly()
    for m, c in p.terms.items():
        term = SuperPoly.scalar(c)
        for v, e in m:
            if v in images:
                if e < 0:
                    raise ValueError("cannot substitute into a localized variable")
                term = term * images[v] ** e
            else:
                term = term * SuperPoly({((v, e),): Fraction(1)})
        out += term
    return out


def set_vars_to_zero(p: SuperPoly, pred: Callable[[Var], bool]) -> SuperPoly:
    res = SuperPoly()
    for m, c in p.terms.items():
        if any(pred(v) for v, _ in m):
            continue
        res.terms[m] = c
    return res


def dual_pair(coh: Mono | Iterable[tuple[Var, int]], hom: SuperPoly) -> Fraction:
    """Pairing of a cohomology monomial against a homology polynomial.

    Matching-exponent terms contribute prod(m!) with the sign
    (-1)^{C(t,2)} where t is the number of odd variables in the monomial
    (one factor -1 per strictly ordered pair of odd variables).
    """
    sign_, mono = normalize_monomial(coh)
    if sign_ == 0:
        return Fraction(0)
    if hom.has_negative_exponents():
        raise ValueError("pairing requires a localization-free polynomial")
    c = hom.terms.get(mono)
    if c is None:
        return Fraction(0)
    t = sum(1 for v, _ in mono if var_is_odd(v))
    val = sign_ * c * (-1) ** (t * (t - 1) // 2)
    for _, e in mono:
        for i in range(2, e + 1):
            val *= i
    return val


def invert_unit_monomial(p: SuperPoly, unit: Var | None) -> SuperPoly:
    """Invert c * unit^k (localization at the declared even unit)."""
    if len(p.terms) != 1:
        raise ValueError("leading part is not a unit multiple")
    (mono, c), = p.terms.items()
    if mono == ():
        return SuperPoly.scalar(Fraction(1) / c)
    if unit is None or len(mono) != 1 or mono[0][0] != unit or var_is_odd(unit):
        raise ValueError("leading part is not a power of the declared unit")
    k = mono[0][1]
    return SuperPoly({((unit, -k),): Fraction(1) / c})


# -- canonical JSON -----------------------------------------------------

def poly_to_json(p: SuperPoly) -> dict:
    terms = []
    for m in sorted(p.terms, key=_mono_sort_key):
        terms.append({
            "coeff": rational_to_str(p.terms[m]),
            "vars": [[fam, j, k, l, e] for (fam, j, k, l), e in m],
        })
    return {"terms": terms}


def poly_from_json(data: dict) -> SuperPoly:
    out = SuperPoly()
    for t in data["terms"]:
        coeff = rational_from_str(t["coeff"])
        factors = [((fam, j, k, l), e) for fam, j, k, l, e in t["vars"]]
        out += SuperPoly.monomial(factors, coeff)
    return out
