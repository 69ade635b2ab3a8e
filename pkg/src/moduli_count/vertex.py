"""The explicit vertex-algebra layer on moduli homology.

Homology classes are tagged polynomials e^{(r,d)} * p (or e^{((r,d),e)} * p
for framed pairs).  This module implements the Euler pairings, the
translation operator, the two-argument vertex operation and its Lie bracket,
the canonical gauge (the unique coset representative killed by d/ds_{1,0,1}),
a linear-algebra normal form modulo translations (used where the gauge map is
unavailable, i.e. rank zero), and the contraction inverting the bracket with
the unit framing class.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .exact import rational_from_str, rational_to_str
from .superalg import (
    Mono,
    SuperPoly,
    Var,
    derive,
    mono_degree,
    pair_var,
    poly_from_json,
    poly_to_json,
    prime_var,
    s_var,
    substitute,
    unprime_var,
    var_is_odd,
    var_key,
)
from .laurent import Series

KClass = tuple[int, int]
PairKClass = tuple[int, int, int]


@dataclass(frozen=True)
class CurveContext:
    """Genus plus, when pairs are involved, the framing twist nu."""
    genus: int
    nu: int | None = None

    def __post_init__(self):
        if self.genus < 0:
            raise ValueError("genus must be >= 0")


def chi(a: KClass, b: KClass, ctx: CurveContext) -> int:
    """(1-g) r r' + r d' - d r'."""
    r, d = a
    rp, dp = b
    return (1 - ctx.genus) * r * rp + r * dp - d * rp


def chi_pair(a: Sequence[int], b: Sequence[int], ctx: CurveContext) -> int:
    """(1-g) r r' + (r-e) d' - (d + nu e) r' + e e'."""
    r, d, e = _with_e(a)
    rp, dp, ep = _with_e(b)
    if (e or ep) and ctx.nu is None:
        raise ValueError("pair classes need a declared nu")
    nu = ctx.nu or 0
    return (1 - ctx.genus) * r * rp + (r - e) * dp - (d + nu * e) * rp + e * ep


def _with_e(k: Sequence[int]) -> PairKClass:
    if len(k) == 2:
        return (k[0], k[1], 0)
    return tuple(k)  # type: ignore[return-value]


def translation(rep: SuperPoly, kclass: Sequence[int], primed: bool = False) -> SuperPoly:
    """Translation operator: (r s101 + d s122 [+ e s+01]) + level shifts.

    With primed=True, acts on the primed copies of the variables instead.
    """
    r, d, e = _with_e(kclass)
    tag = (lambda v: prime_var(v)) if primed else (lambda v: v)
    out = SuperPoly.zero()
    mult = SuperPoly.zero()
    if r:
        mult += SuperPoly.var(tag(s_var(1, 0, 1))) * r
    if d:
        mult += SuperPoly.var(tag(s_var(1, 2, 2))) * d
    if e:
        mult += SuperPoly.var(tag(pair_var(1))) * e
    if mult:
        out += mult * rep
    suffix = "'" if primed else ""
    for v in rep.variables():
        fam, j, k, l = v
        if fam not in ("s" + suffix, "+" + suffix):
            continue
        shifted = (fam, j, k, l + 1)
        out += SuperPoly.var(shifted) * derive(rep, v)
    return out


def exp_zD(rep: SuperPoly, kclass: Sequence[int], var: str, cap: int) -> Series:
    """sum_n (z^n / n!) D^n rep, truncated at z^cap."""
    if cap < 0:
        return Series((var,))
    terms = {(0,): rep} if rep else {}
    cur = rep
    fact = 1
    for n in range(1, cap + 1):
        cur = translation(cur, kclass)
        if not cur:
            break
        fact *= n
        scaled = cur * Fraction(1, fact)
        if scaled:
            terms[(n,)] = scaled
    return Series((var,), terms)


@dataclass
class HomologyClass:
    """A K-theory tag plus a polynomial representative in a declared gauge."""
    kclass: tuple
    rep: SuperPoly
    gauge: str = "raw"            # "xi" | "normal" | "raw"
    nu: int | None = None
    extrapolated: bool = False

    @property
    def rank(self) -> int:
        return self.kclass[0]

    @property
    def deg(self) -> int:
        return self.kclass[1]

    def is_pair(self) -> bool:
        return len(self.kclass) == 3

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HomologyClass):
            return NotImplemented
        return (tuple(self.kclass) == tuple(other.kclass) and self.rep == other.rep
                and self.gauge == other.gauge)


def class_to_json(c: HomologyClass) -> dict:
    out = {
        "kclass": list(c.kclass),
        "gauge": c.gauge,
        "poly": poly_to_json(c.rep),
    }
    if c.nu is not None:
        out["nu"] = c.nu
    if c.extrapolated:
        out["extrapolated"] = True
    return out


def class_from_json(data: dict) -> HomologyClass:
    return HomologyClass(
        kclass=tuple(data["kclass"]),
        rep=poly_from_json(data["poly"]),
        gauge=data["gauge"],
        nu=data.get("nu"),
        extrapolated=data.get("extrapolated", False),
    )


# -- the two-argument vertex operation ------------------------------------

# Nonzero symmetrized pairing entries ((j,k) block, (j',k') block).  Odd-odd
# blocks cancel; the remaining blocks are encoded by family key:
#   "10" = (1,0) sheaf, "12" = (1,2) sheaf, "+0" = framing.
def _dd_combos(ctx: CurveContext) -> list[tuple[str, str, Fraction]]:
    g = ctx.genus
    nu = ctx.nu if ctx.nu is not None else 0
    return [
        ("10", "10", Fraction(2 * (1 - g))),
        ("12", "+0", Fraction(1)),
        ("+0", "12", Fraction(-1)),
        ("+0", "10", Fraction(-nu)),
        ("10", "+0", Fraction(-nu)),
        ("+0", "+0", Fraction(2)),
    ]


_BLOCK_KL = {"10": 0, "12": 2, "+0": 0}       # cohomological index k of the block
_BLOCK_SCALAR_L = {"10": 0, "12": 1, "+0": 0}  # level of the scalar slot


def _block_var(block: str, l: int, primed: bool) -> Var:
    if block == "10":
        v = s_var(1, 0, l)
    elif block == "12":
        v = s_var(1, 2, l)
    else:
        v = pair_var(l)
    return prime_var(v) if primed else v


def _block_levels(block: str, poly: SuperPoly, primed: bool) -> list[int]:
    """Derivative levels of this block present in the polynomial."""
    fam = {"10": "s", "12": "s", "+0": "+"}[block] + ("'" if primed else "")
    k = _BLOCK_KL[block]
    want_pair = block == "+0"
    levels = set()
    for v in poly.variables():
        vf, vj, vk, vl = v
        if vf != fam:
            continue
        if want_pair or (vj == 1 and vk == k):
            levels.add(vl)
    return sorted(levels)


def _scalar_of(block: str, kclass: PairKClass) -> Fraction:
    r, d, e = kclass
    return Fraction({"10": r, "12": d, "+0": e}[block])


def vertex_op(a: HomologyClass, b: HomologyClass, ctx: CurveContext,
              var: str = "z", cap: int = 0) -> Series:
    """The vertex operation Y(a, z) b as a truncated Laurent series in z.

    Both sheaf classes and framed pair classes are supported; a sheaf class
    acts as a pair class with e = 0.  Only even classes are handled (all
    bracketed classes in the pipelines are even), which is asserted.
    """
    ka = _with_e(a.kclass)
    kb = _with_e(b.kclass)
    if a.rep.parity() not in (0, None) or b.rep.parity() not in (0, None):
        raise ValueError("vertex operation implemented for even classes only")
    pairlike = ka[2] or kb[2] or any(v[0].startswith("+") for v in (a.rep.variables() | b.rep.variables()))
    if pairlike and ctx.nu is None:
        raise ValueError("pair classes need a declared nu")
    chi_ab = chi_pair(ka, kb, ctx) if pairlike else chi(ka[:2], kb[:2], ctx)
    chi_ba = chi_pair(kb, ka, ctx) if pairlike else chi(kb[:2], ka[:2], ctx)

    b_primed = SuperPoly({
        tuple((prime_var(v), e) for v, e in m): c for m, c in b.rep.terms.items()
    })
    doubled = a.rep * b_primed

    # exp of the double-derivation operator: z-exponent -> polynomial
    table: dict[int, SuperPoly] = {0: doubled}
    combos = _dd_combos(ctx)
    current: dict[int, SuperPoly] = dict(table)
    order = 0
    while current:
        order += 1
        nxt: dict[int, SuperPoly] = {}
        for ze, poly in current.items():
            if not poly:
                continue
            for blk_u, blk_p, cval in combos:
                if not cval:
                    continue
                u_slots: list[tuple[int, SuperPoly]] = []
                su = _scalar_of(blk_u, ka)
                if su:
                    u_slots.append((_BLOCK_SCALAR_L[blk_u], poly * su))
                for l in _block_levels(blk_u, poly, primed=False):
                    dp = derive(poly, _block_var(blk_u, l, primed=False))
                    if dp:
                        u_slots.append((l, dp))
                if not u_slots:
                    continue
                for lu, after_u in u_slots:
                    sp = _scalar_of(blk_p, kb)
                    p_slots: list[tuple[int, SuperPoly]] = []
                    if sp:
                        p_slots.append((_BLOCK_SCALAR_L[blk_p], after_u * sp))
                    for l2 in _block_levels(blk_p, after_u, primed=True):
                        dp2 = derive(after_u, _block_var(blk_p, l2, primed=True))
                        if dp2:
                            p_slots.append((l2, dp2))
                    ku, kp = _BLOCK_KL[blk_u], _BLOCK_KL[blk_p]
                    for lp, res in p_slots:
                        n = lu + lp - (ku + kp) // 2
                        if n <= 0:
                            continue
                        coeff = cval * (-1) ** (lu + 1) * _fact(n - 1)
                        contrib = res * coeff
                        if not contrib:
                            continue
                        key = ze - n
                        acc = nxt.get(key)
                        nxt[key] = contrib if acc is None else acc + contrib
        current = {k: v * Fraction(1, order) for k, v in nxt.items() if v}
        for k, v in current.items():
            acc = table.get(k)
            s = v if acc is None else acc + v
            if s:
                table[k] = s
            else:
                table.pop(k, None)

    # exp(z D_A) on the unprimed variables, then merge primes
    shift = chi_ab + chi_ba
    merged_class = tuple(x + y for x, y in zip(ka, kb))
    sign = Fraction((-1) ** chi_ab)
    out: dict[tuple[int, ...], SuperPoly] = {}
    unprime_rule_cache: dict[Var, SuperPoly] = {}

    def _merge(poly: SuperPoly) -> SuperPoly:
        rule = {}
        for v in poly.variables():
            if v[0].endswith("'"):
                if v not in unprime_rule_cache:
                    unprime_rule_cache[v] = SuperPoly.var(unprime_var(v))
                rule[v] = unprime_rule_cache[v]
        return substitute(poly, rule) if rule else poly

    for ze, poly in table.items():
        n_max = cap - shift - ze
        cur = poly
        fact = 1
        for n in range(0, n_max + 1):
            if n > 0:
                cur = translation(cur, ka)
                fact *= n
                if not cur:
                    break
            piece = _merge(cur * Fraction(1, fact)) * sign
            if not piece:
                continue
            key = (shift + ze + n,)
            acc = out.get(key)
            s = piece if acc is None else acc + piece
            if s:
                out[key] = s
            else:
                out.pop(key, None)
    return Series((var,), out)


def _fact(n: int) -> int:
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def lie_bracket(a: HomologyClass, b: HomologyClass, ctx: CurveContext) -> HomologyClass:
    """res_z Y(a, z) b, as a raw coset representative."""
    series = vertex_op(a, b, ctx, cap=-1)
    rep = series.coeff({"z": -1})
    ka = _with_e(a.kclass)
    kb = _with_e(b.kclass)
    merged = tuple(x + y for x, y in zip(ka, kb))
    if merged[2] == 0 and not any(v[0].startswith("+") for v in rep.variables()):
        merged = merged[:2]
    nu = ctx.nu if len(merged) == 3 else None
    return HomologyClass(merged, rep, gauge="raw", nu=nu)


# -- gauge fixing ----------------------------------------------------------

def fix_gauge(rep: SuperPoly, kclass: Sequence[int]) -> SuperPoly:
    """Canonical coset representative killed by d/ds_{1,0,1} (rank != 0).

    sum_i 1/(i! (-r)^i) D^i (d/ds_{1,0,1})^i rep.
    """
    r = kclass[0]
    if r == 0:
        raise ValueError("gauge fixing needs nonzero rank")
    s101 = s_var(1, 0, 1)
    out = SuperPoly.zero()
    der = rep
    i = 0
    coeff = Fraction(1)
    while der:
        term = der
        for _ in range(i):
            term = translation(term, kclass)
        out += term * coeff
        i += 1
        coeff = Fraction(1, _fact(i)) * Fraction(1, (-r) ** i)
        der = derive(der, s101)
    return out


def fix_gauge_dual(p: SuperPoly, kclass: Sequence[int]) -> SuperPoly:
    """Cohomology-side section: sum_i 1/(i!(-r)^i) S_{1,0,1}^i (D^dual)^i p."""
    r, d, e = _with_e(kclass)
    if r == 0:
        raise ValueError("gauge fixing needs nonzero rank")
    s101 = s_var(1, 0, 1)

    def d_dual(q: SuperPoly) -> SuperPoly:
        out = derive(q, s101) * r
        out += derive(q, s_var(1, 2, 2)) * d
        if e:
            out += derive(q, pair_var(1)) * e
        for v in q.variables():
            fam, j, k, l = v
            if fam not in ("s", "+"):
                continue
            lower = l - 1
            if 2 * lower <= k:
                continue
            out += SuperPoly.var((fam, j, k, lower)) * derive(q, v)
        return out

    out = SuperPoly.zero()
    cur = p
    i = 0
    while cur:
        if i == 0:
            out += cur
        else:
            out += SuperPoly.var(s101, i) * cur * Fraction(1, _fact(i) * (-r) ** i)
        cur = d_dual(cur)
        i += 1
    return out


def apply_gauge(c: HomologyClass) -> HomologyClass:
    rep = fix_gauge(c.rep, c.kclass)
    return replace(c, rep=rep, gauge="xi")


# -- normal form modulo the image of the translation operator --------------

def _universe(genus: int, max_degree: int, include_pair: bool) -> list[Var]:
    out: list[Var] = []
    for l in range(1, max_degree // 2 + 1):
        out.append(s_var(1, 0, l))
    for l in range(2, (max_degree + 2) // 2 + 1):
        out.append(s_var(1, 2, l))
    for j in range(1, 2 * genus + 1):
        for l in range(1, (max_degree + 1) // 2 + 1):
            out.append(s_var(j, 1, l))
    if include_pair:
        for l in range(1, max_degree // 2 + 1):
            out.append(pair_var(l))
    out.sort(key=lambda v: (-var_degree_of(v), var_key(v)))
    return out


def var_degree_of(v: Var) -> int:
    from .superalg import var_degree
    return var_degree(v)


def monomials_of_degree(genus: int, degree: int, include_pair: bool = False) -> list[Mono]:
    """All canonical monomials of the given total degree."""
    vars = _universe(genus, degree, include_pair)
    out: list[Mono] = []

    def rec(idx: int, remaining: int, acc: list[tuple[Var, int]]):
        if remaining == 0:
            out.append(tuple(sorted(acc, key=lambda t: var_key(t[0]))))
            return
        if idx >= len(vars):
            return
        v = vars[idx]
        dv = var_degree_of(v)
        if dv > remaining:
            # variables are sorted by descending degree, but later ones may
            # still fit, so keep scanning
            rec(idx + 1, remaining, acc)
            return
        top = 1 if var_is_odd(v) else remaining // dv
        for e in range(top, 0, -1):
            acc.append((v, e))
            rec(idx + 1, remaining - e * dv, acc)
            acc.pop()
        rec(idx + 1, remaining, acc)

    rec(0, degree, [])
    return out


@lru_cache(maxsize=None)
def _translation_pivots(genus: int, kclass: PairKClass, degree: int,
                        include_pair: bool) -> tuple[dict, dict]:
    """Row-reduced span of {D(m) : m monomial of degree-2}, plus column order."""
    columns = monomials_of_degree(genus, degree, include_pair)
    index = {m: i for i, m in enumerate(columns)}
    pivots: dict[int, dict[Mono, Fraction]] = {}
    if degree >= 2:
        for m in monomials_of_degree(genus, degree - 2, include_pair):
            image = translation(SuperPoly({m: Fraction(1)}), kclass)
            row = dict(image.terms)
            _eliminate(row, pivots, index, insert=True)
    return pivots, index


def _eliminate(row: dict[Mono, Fraction], pivots: dict[int, dict[Mono, Fraction]],
               index: dict[Mono, int], insert: bool) -> dict[Mono, Fraction]:
    while row:
        lead = min(row, key=lambda m: index[m])
        li = index[lead]
        if li in pivots:
            c = row[lead]
            for m, v in pivots[li].items():
                nv = row.get(m, Fraction(0)) - c * v
                if nv:
                    row[m] = nv
                else:
                    row.pop(m, None)
        else:
            if insert:
                inv = Fraction(1) / row[lead]
                pivots[li] = {m: v * inv for m, v in row.items()}
            return row
    return row


def normal_form(rep: SuperPoly, kclass: Sequence[int], ctx: CurveContext) -> SuperPoly:
    """Canonical representative of rep modulo im D (graded row reduction)."""
    if not rep:
        return rep
    degree = rep.degree()
    include_pair = len(kclass) == 3 or any(v[0].startswith("+") for v in rep.variables())
    pivots, index = _translation_pivots(ctx.genus, _with_e(kclass), degree, include_pair)
    row = dict(rep.terms)
    rem = _eliminate(row, pivots, index, insert=False)
    return SuperPoly(rem)


def classes_equal_mod_translations(a: HomologyClass, b: HomologyClass,
                                   ctx: CurveContext) -> bool:
    if tuple(_with_e(a.kclass)) != tuple(_with_e(b.kclass)):
        return False
    return normal_form(a.rep - b.rep, a.kclass, ctx) == SuperPoly.zero()


# -- contraction against the unit framing class -----------------------------

def contract_framing(c: HomologyClass, ctx: CurveContext) -> HomologyClass:
    """Invert gamma -> -[unit framing class, gamma] on the framed side.

    Gauge-fix, apply (-d/ds_{+,0,1})^{r nu + d - 1}, set the framing
    variables to zero, and retag to the sheaf class.
    """
    if not c.is_pair() or c.kclass[2] != 1:
        raise ValueError("contraction needs a framed class with e = 1")
    r, d, _ = c.kclass
    nu = c.nu if c.nu is not None else ctx.nu
    if nu is None:
        raise ValueError("contraction needs nu")
    power = r * nu + d - 1
    if power < 0:
        raise ValueError("contraction needs r*nu + d > 0")
    rep = fix_gauge(c.rep, c.kclass) if c.gauge != "xi" else c.rep
    for _ in range(power):
        rep = -derive(rep, pair_var(1))
    from .superalg import set_vars_to_zero
    rep = set_vars_to_zero(rep, lambda v: v[0].startswith("+"))
    return HomologyClass((r, d), rep, gauge="xi", nu=nu)


def unit_framing_class() -> HomologyClass:
    """The class of the one-dimensional framing with zero sheaf."""
    return HomologyClass((0, 0, 1), SuperPoly.scalar(1), gauge="xi")
