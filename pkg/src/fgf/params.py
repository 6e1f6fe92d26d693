"""Field parameters and regime classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

SNAP_TOL = 1e-12


class Regime(enum.Enum):
    """Which closed form describes the whole-space covariance kernel."""

    POS_NONINTEGER_H = "PosNonIntegerH"
    NONNEG_INTEGER_H = "NonnegIntegerH"
    NEG_NONINTEGER_S = "NegNonIntegerS"
    NONPOS_INTEGER_S = "NonposIntegerS"


def as_exact(value) -> Fraction | float:
    """Return ``value`` as a Fraction when it is (or snaps to) a half-integer.

    Rationals pass through unchanged. Floats within ``SNAP_TOL`` of a multiple
    of 1/2 are snapped, since Gamma poles sit exactly on those points.
    """
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    x = float(value)
    if not math.isfinite(x):
        raise ValueError(f"non-finite parameter: {value!r}")
    half = round(2 * x)
    if abs(2 * x - half) <= 2 * SNAP_TOL:
        return Fraction(half, 2)
    return x


def _is_integer(x) -> bool:
    if isinstance(x, Fraction):
        return x.denominator == 1
    return False


def classify(s, d: int) -> Regime:
    s = as_exact(s)
    h = s - Fraction(d, 2) if isinstance(s, Fraction) else s - d / 2
    if _is_integer(h) and h >= 0:
        return Regime.NONNEG_INTEGER_H
    if s > 0:
        return Regime.POS_NONINTEGER_H
    if _is_integer(s):
        return Regime.NONPOS_INTEGER_S
    return Regime.NEG_NONINTEGER_S


@dataclass(frozen=True)
class FieldSpec:
    """The pair (d, s) with derived Hurst parameter ``H = s - d/2``.

    ``s`` may be given as a float, a string such as ``"3/2"``, or a Fraction.
    """

    d: int
    s_exact: Fraction | float
    regime: Regime = field(init=False)

    def __init__(self, d: int, s) -> None:
        if int(d) != d or d < 1:
            raise ValueError(f"dimension must be a positive integer, got {d!r}")
        object.__setattr__(self, "d", int(d))
        object.__setattr__(self, "s_exact", as_exact(s))
        object.__setattr__(self, "regime", classify(self.s_exact, self.d))

    @property
    def s(self) -> float:
        return float(self.s_exact)

    @property
    def H(self) -> float:
        return float(self.H_exact)

    @property
    def H_exact(self) -> Fraction | float:
        if isinstance(self.s_exact, Fraction):
            return self.s_exact - Fraction(self.d, 2)
        return self.s_exact - self.d / 2

    @property
    def integer_H(self) -> int | None:
        if self.regime is Regime.NONNEG_INTEGER_H:
            return int(self.H_exact)
        return None

    def __repr__(self) -> str:
        return f"FieldSpec(d={self.d}, s={self.s_exact}, H={self.H_exact}, regime={self.regime.value})"
