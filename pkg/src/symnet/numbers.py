"""Exact rational helpers.

Box endpoints, gain slopes and quantization parameters are kept as
``Fraction`` values throughout so lattice geometry and the design
arithmetic are bit-exact and platform independent; only dynamics
evaluation runs in double precision.
"""

from __future__ import annotations

from decimal import Decimal
from fractions import Fraction

__all__ = [
    "Rational",
    "to_fraction",
    "floor_log10",
    "truncate_significant",
    "round_decimals_half_up",
    "decimal_string",
    "ceil_div",
    "floor_div",
]

Rational = Fraction


def to_fraction(value) -> Fraction:
    """Exact conversion of int/str/Decimal/Fraction/float to Fraction.

    Strings go through Decimal so ``"1.66e-3"`` means the exact decimal
    166/100000, not the nearest binary double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("boolean is not a number")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(Decimal(value))
    if isinstance(value, Decimal):
        return Fraction(value)
    if isinstance(value, float):
        # exact value of the double, used only where a float sneaks in
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational number")


def floor_log10(q: Fraction) -> int:
    """Largest e with 10**e <= q, for q > 0. Exact integer arithmetic."""
    if q <= 0:
        raise ValueError("floor_log10 requires a positive value")
    # digit-count estimate is within one of the answer; fix exactly
    e = len(str(q.numerator)) - len(str(q.denominator))
    while Fraction(10) ** e > q:
        e -= 1
    while Fraction(10) ** (e + 1) <= q:
        e += 1
    return e


def truncate_significant(q: Fraction, digits: int = 3) -> Fraction:
    """Round q > 0 down to ``digits`` significant decimal digits."""
    if q == 0:
        return Fraction(0)
    if q < 0:
        raise ValueError("truncate_significant requires a nonnegative value")
    scale = Fraction(10) ** (floor_log10(q) - digits + 1)
    return (q // scale) * scale


def round_decimals_half_up(q: Fraction, decimals: int) -> Fraction:
    """Round q to ``decimals`` decimal places, ties away from zero."""
    scale = Fraction(10) ** decimals
    scaled = q * scale
    if scaled >= 0:
        rounded = (scaled.numerator * 2 + scaled.denominator) // (2 * scaled.denominator)
    else:
        rounded = -((-scaled.numerator * 2 + scaled.denominator) // (2 * scaled.denominator))
    return Fraction(rounded, 1) / scale


def decimal_string(q: Fraction) -> str:
    """Exact decimal string when the denominator is 2^a*5^b, else 'p/q'."""
    den = q.denominator
    two = 0
    while den % 2 == 0:
        den //= 2
        two += 1
    five = 0
    while den % 5 == 0:
        den //= 5
        five += 1
    if den != 1:
        return f"{q.numerator}/{q.denominator}"
    shift = max(two, five)
    digits = q.numerator * 10**shift // q.denominator
    sign = "-" if digits < 0 else ""
    digits = abs(digits)
    if shift == 0:
        return f"{sign}{digits}"
    text = str(digits).rjust(shift + 1, "0")
    whole, frac = text[:-shift], text[-shift:]
    frac = frac.rstrip("0")
    return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"


def ceil_div(num: int, den: int) -> int:
    """Ceiling of num/den for integers, den > 0."""
    return -((-num) // den)


def floor_div(num: int, den: int) -> int:
    """Floor of num/den for integers, den > 0."""
    return num // den
