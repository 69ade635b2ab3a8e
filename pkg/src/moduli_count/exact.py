"""Exact rational arithmetic and the combinatorial number-theory kernel.

All coefficients in the engine are ``fractions.Fraction`` values; floating
point never appears.  This module adds the Bernoulli numbers/polynomials
(convention B_1 = -1/2, generating function y/(e^y - 1)), the Leibniz
harmonic triangle, and the canonical "p/q" string form used by the JSON
serializers.
"""

from __future__ import annotations

import threading
from fractions import Fraction
from math import comb

Rational = Fraction

_bernoulli_cache: list[Fraction] = [Fraction(1)]
_bernoulli_lock = threading.Lock()


def bernoulli_number(n: int) -> Fraction:
    """Return B_n, with B_1 = -1/2.

    Computed from the recurrence sum_{k=0}^{n} C(n+1, k) B_k = 0 and cached;
    reads are lock-free once the cache is warm.
    """
    if n < 0:
        raise ValueError("Bernoulli index must be nonnegative")
    if n >= len(_bernoulli_cache):
        with _bernoulli_lock:
            while n >= len(_bernoulli_cache):
                m = len(_bernoulli_cache)
                acc = sum(comb(m + 1, k) * _bernoulli_cache[k] for k in range(m))
                _bernoulli_cache.append(Fraction(-acc, m + 1))
    return _bernoulli_cache[n]


def bernoulli_polynomial(n: int, x: Fraction | int) -> Fraction:
    """Return B_n(x) = sum_k C(n, k) B_k x^{n-k}."""
    if n < 0:
        raise ValueError("Bernoulli index must be nonnegative")
    x = Fraction(x)
    return sum(
        (comb(n, k) * bernoulli_number(k) * x ** (n - k) for k in range(n + 1)),
        Fraction(0),
    )


def leibniz_entry(m: int, m_prime: int) -> Fraction:
    """Entry 1/((m+1) C(m, m')) of the Leibniz harmonic triangle."""
    if not 0 <= m_prime <= m:
        raise ValueError("need 0 <= m' <= m")
    return Fraction(1, (m + 1) * comb(m, m_prime))


def binomial(n: int, k: int) -> int:
    """C(n, k), zero outside 0 <= k <= n."""
    if k < 0 or k > n:
        return 0
    return comb(n, k)


def rational_to_str(x: Fraction | int) -> str:
    """Canonical string form: "p/q" in lowest terms, or "p" when q = 1."""
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def rational_from_str(s: str) -> Fraction:
    """Inverse of :func:`rational_to_str` (also accepts any Fraction literal)."""
    return Fraction(s)
