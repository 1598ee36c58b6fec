"""Sign plus log-magnitude numbers for quantities that overflow doubles."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SignedLogValue:
    sign: int
    log_mag: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign}")
        if self.sign == 0:
            object.__setattr__(self, "log_mag", -math.inf)
        elif math.isnan(self.log_mag):
            raise ValueError("log_mag is nan")

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        x = float(x)
        if x == 0.0:
            return cls(0)
        if math.isnan(x):
            raise ValueError("cannot represent nan")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def from_log(cls, log_mag: float, sign: int = 1) -> "SignedLogValue":
        if log_mag == -math.inf:
            return cls(0)
        return cls(sign, float(log_mag))

    @classmethod
    def zero(cls) -> "SignedLogValue":
        return cls(0)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.log_mag > 709.78:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_mag)

    def __float__(self) -> float:
        return self.to_float()

    def log2(self) -> float:
        """log2 of the magnitude."""
        return self.log_mag / math.log(2.0)

    def __neg__(self) -> "SignedLogValue":
        return SignedLogValue(-self.sign, self.log_mag)

    def __abs__(self) -> "SignedLogValue":
        return SignedLogValue(abs(self.sign), self.log_mag)

    def __mul__(self, other) -> "SignedLogValue":
        other = _coerce(other)
        if self.sign == 0 or other.sign == 0:
            return SignedLogValue(0)
        return SignedLogValue(self.sign * other.sign, self.log_mag + other.log_mag)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "SignedLogValue":
        other = _coerce(other)
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return SignedLogValue(0)
        return SignedLogValue(self.sign * other.sign, self.log_mag - other.log_mag)

    def __rtruediv__(self, other) -> "SignedLogValue":
        return _coerce(other) / self

    def __add__(self, other) -> "SignedLogValue":
        other = _coerce(other)
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        big, small = (self, other) if self.log_mag >= other.log_mag else (other, self)
        ratio = math.exp(small.log_mag - big.log_mag)
        if big.sign == small.sign:
            return SignedLogValue(big.sign, big.log_mag + math.log1p(ratio))
        if ratio == 1.0:
            return SignedLogValue(0)
        return SignedLogValue(big.sign, big.log_mag + math.log1p(-ratio))

    __radd__ = __add__

    def __sub__(self, other) -> "SignedLogValue":
        return self + (-_coerce(other))

    def __rsub__(self, other) -> "SignedLogValue":
        return _coerce(other) - self

    def __pow__(self, k: float) -> "SignedLogValue":
        if self.sign == 0:
            if k <= 0:
                raise ZeroDivisionError("zero to a non-positive power")
            return SignedLogValue(0)
        if self.sign < 0:
            if float(k).is_integer():
                sign = -1 if int(k) % 2 else 1
                return SignedLogValue(sign, k * self.log_mag)
            raise ValueError("fractional power of a negative value")
        return SignedLogValue(1, k * self.log_mag)

    def __lt__(self, other) -> bool:
        return (self - _coerce(other)).sign < 0

    def __le__(self, other) -> bool:
        return (self - _coerce(other)).sign <= 0

    def __gt__(self, other) -> bool:
        return (self - _coerce(other)).sign > 0

    def __ge__(self, other) -> bool:
        return (self - _coerce(other)).sign >= 0

    def __repr__(self) -> str:
        if self.sign == 0:
            return "SignedLogValue(0)"
        return f"SignedLogValue({self.sign:+d}, {self.log_mag!r})"


def _coerce(x) -> SignedLogValue:
    if isinstance(x, SignedLogValue):
        return x
    return SignedLogValue.from_float(x)


def slv_sum(values) -> SignedLogValue:
    """Sum an iterable of SignedLogValue pivoting on the largest magnitude."""
    values = [v for v in values if v.sign != 0]
    if not values:
        return SignedLogValue(0)
    pivot = max(v.log_mag for v in values)
    total = math.fsum(v.sign * math.exp(v.log_mag - pivot) for v in values)
    if total == 0.0:
        return SignedLogValue(0)
    return SignedLogValue(1 if total > 0 else -1, pivot + math.log(abs(total)))


def logsumexp_signed(log_mag: np.ndarray, sign: np.ndarray, weights: np.ndarray | None = None) -> tuple[SignedLogValue, SignedLogValue]:
    """Signed sum of sign*exp(log_mag)*weights; also returns the sum of absolute values."""
    log_mag = np.asarray(log_mag, dtype=float)
    sign = np.asarray(sign, dtype=float)
    if weights is not None:
        weights = np.asarray(weights, dtype=float)
        sign = sign * np.sign(weights)
        with np.errstate(divide="ignore"):
            log_mag = log_mag + np.log(np.abs(weights))
    mask = (sign != 0) & np.isfinite(log_mag)
    if not np.any(mask):
        return SignedLogValue(0), SignedLogValue(0)
    lm = log_mag[mask]
    sg = sign[mask]
    pivot = lm.max()
    e = np.exp(lm - pivot)
    total = float(np.sum(sg * e))
    absolute = float(np.sum(e))
    signed = SignedLogValue(0) if total == 0.0 else SignedLogValue(1 if total > 0 else -1, pivot + math.log(abs(total)))
    return signed, SignedLogValue(1, pivot + math.log(absolute))
