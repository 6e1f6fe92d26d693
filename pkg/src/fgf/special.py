"""Signed log-gamma helpers and the Gauss hypergeometric function."""

from __future__ import annotations

import math

from .errors import HypergeometricError

_POLE_TOL = 1e-12


def is_nonpositive_integer(x: float, tol: float = _POLE_TOL) -> bool:
    return x <= tol and abs(x - round(x)) <= tol


def gamma_sign(x: float) -> int:
    """Sign of Gamma(x); raises at poles."""
    if x > 0:
        return 1
    if is_nonpositive_integer(x):
        raise ZeroDivisionError(f"Gamma pole at {x}")
    # Gamma alternates sign on each unit interval left of zero
    return -1 if math.floor(-x) % 2 == 0 else 1


def log_gamma_signed(x: float) -> tuple[float, int]:
    """Return ``(log|Gamma(x)|, sign Gamma(x))``."""
    sign = gamma_sign(x)
    return math.lgamma(x), sign


def rgamma(x: float) -> float:
    """1/Gamma(x), equal to zero at the poles."""
    if is_nonpositive_integer(x):
        return 0.0
    lg, sg = log_gamma_signed(x)
    return sg * math.exp(-lg)


def gamma_product(num: list[float], den: list[float]) -> float:
    """prod Gamma(num) / prod Gamma(den), evaluated in log space.

    A pole in ``den`` gives 0; a pole in ``num`` raises ZeroDivisionError.
    """
    if any(is_nonpositive_integer(x) for x in den):
        return 0.0
    log_val = 0.0
    sign = 1
    for x in num:
        lg, sg = log_gamma_signed(x)
        log_val += lg
        sign *= sg
    for x in den:
        lg, sg = log_gamma_signed(x)
        log_val -= lg
        sign *= sg
    return sign * math.exp(log_val)


def _series(a: float, b: float, c: float, z: float, max_terms: int = 20000) -> float:
    if is_nonpositive_integer(c):
        raise HypergeometricError(f"c={c} is a nonpositive integer")
    total = 1.0
    term = 1.0
    for n in range(max_terms):
        term *= (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        total += term
        if term == 0.0:
            return total
        if abs(term) <= 1e-17 * max(abs(total), 1e-300) and n > 2:
            return total
    raise HypergeometricError(f"2F1({a},{b};{c};{z}) series did not converge")


def hyp2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real ``z`` in [0, 1].

    Power series for ``z <= 0.5`` or terminating series. Above 0.5 the
    linear transformation toward ``1 - z`` is used; that branch raises
    :class:`HypergeometricError` when ``c - a - b`` is within 1e-9 of an
    integer (the logarithmic case is not implemented).
    """
    if not 0.0 <= z <= 1.0:
        raise HypergeometricError(f"z={z} outside [0, 1]")
    if is_nonpositive_integer(c):
        raise HypergeometricError(f"c={c} is a nonpositive integer")
    if is_nonpositive_integer(a) or is_nonpositive_integer(b):
        return _series(a, b, c, z)
    if z <= 0.5:
        return _series(a, b, c, z)
    gap = c - a - b
    if abs(gap - round(gap)) <= 1e-9:
        raise HypergeometricError(
            f"degenerate connection: c-a-b={gap} is an integer (logarithmic case)"
        )
    if z == 1.0:
        if gap <= 0:
            raise HypergeometricError(f"2F1 diverges at z=1 with c-a-b={gap}")
        return gamma_product([c, gap], [c - a, c - b])
    w = 1.0 - z
    first = gamma_product([c, gap], [c - a, c - b]) * _series(a, b, 1.0 - gap, w)
    second = (
        gamma_product([c, -gap], [a, b])
        * w**gap
        * _series(c - a, c - b, 1.0 + gap, w)
    )
    return first + second
