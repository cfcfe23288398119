"""Truncated p-adic branch codes, the Monna map and ultrametric geometry.

Everything here is exact: integers and :class:`fractions.Fraction`. Digit
index 0 is the root-most split, so a longer shared root-side prefix means a
smaller distance.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

from .errors import ConfigError, IncompatibleCodesError, InvalidCodeError, InvalidRadiusError

__all__ = [
    "BranchCode",
    "UltrametricBall",
    "is_prime",
    "encode_edge",
    "monna_map",
    "padic_valuation",
    "padic_norm",
    "common_prefix_length",
    "ultrametric_distance",
    "ball_members",
]


@lru_cache(maxsize=None)
def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def _require_prime(p: int) -> None:
    if not isinstance(p, int) or not is_prime(p):
        raise ConfigError(f"base must be a prime >= 2, got {p!r}")


@dataclass(frozen=True)
class BranchCode:
    """Fixed-length base-``p`` digit string of a dendrogram branch.

    ``digits[0]`` is the split closest to the root.
    """

    digits: tuple[int, ...]
    base: int = 2

    def __post_init__(self) -> None:
        digits = tuple(map(int, self.digits))
        object.__setattr__(self, "digits", digits)
        _require_prime(self.base)
        if digits and (min(digits) < 0 or max(digits) >= self.base):
            j, d = next((j, d) for j, d in enumerate(digits) if not 0 <= d < self.base)
            raise InvalidCodeError(f"digit {d} at index {j} outside [0, {self.base})")

    @classmethod
    def from_string(cls, text: str, base: int = 2) -> "BranchCode":
        return cls(tuple(int(c, base) for c in text), base)

    def __len__(self) -> int:
        return len(self.digits)

    def __str__(self) -> str:
        if self.base <= 10:
            return "".join(str(d) for d in self.digits)
        return ".".join(str(d) for d in self.digits)

    def padded(self, length: int) -> "BranchCode":
        """Right-pad with zero digits (leaf side), keeping root-side prefixes."""
        if length < len(self.digits):
            raise InvalidCodeError("cannot pad a code to a shorter length")
        return BranchCode(self.digits + (0,) * (length - len(self.digits)), self.base)


def encode_edge(code: BranchCode) -> int:
    """Natural number ``sum_j d_j p^j`` of a branch."""
    p = code.base
    n = 0
    for d in reversed(code.digits):
        n = n * p + d
    return n


def monna_map(code: BranchCode) -> Fraction:
    """Exact rational ``sum_j d_j p^(-j-1)`` in [0, 1)."""
    p = code.base
    num = 0
    for d in code.digits:
        num = num * p + d
    return Fraction(num, p ** len(code.digits))


def padic_valuation(n: int, p: int) -> int | None:
    """Largest ``v`` with ``p**v | n``; ``None`` for ``n == 0``."""
    _require_prime(p)
    if n == 0:
        return None
    n = abs(n)
    v = 0
    while n % p == 0:
        n //= p
        v += 1
    return v


@lru_cache(maxsize=4096)
def _inverse_power(p: int, k: int) -> Fraction:
    return Fraction(1, p**k)


def padic_norm(n: int, p: int) -> Fraction:
    """``|n|_p = p^(-v_p(n))``, with ``|0|_p = 0``."""
    v = padic_valuation(n, p)
    if v is None:
        return Fraction(0)
    return _inverse_power(p, v)


def _check_compatible(a: BranchCode, b: BranchCode) -> None:
    if a.base != b.base or len(a.digits) != len(b.digits):
        raise IncompatibleCodesError(
            f"codes differ in base/length: ({a.base}, {len(a)}) vs ({b.base}, {len(b)})"
        )


def common_prefix_length(a: BranchCode, b: BranchCode) -> int:
    _check_compatible(a, b)
    L = 0
    for x, y in zip(a.digits, b.digits):
        if x != y:
            break
        L += 1
    return L


def ultrametric_distance(a: BranchCode, b: BranchCode) -> Fraction:
    """``p^(-L)`` for common root-side prefix length ``L``; 0 iff ``a == b``."""
    L = common_prefix_length(a, b)
    if L == len(a.digits):
        return Fraction(0)
    return _inverse_power(a.base, L)


def _radius_level(radius: Fraction, p: int) -> int:
    """Prefix length ``L`` such that ``radius == p^(-L)``; radii >= 1 give 0."""
    radius = Fraction(radius)
    if radius >= 1:
        return 0
    if radius <= 0 or radius.numerator != 1:
        raise InvalidRadiusError(f"radius {radius} is not a power of 1/{p}")
    L = 0
    den = radius.denominator
    while den % p == 0:
        den //= p
        L += 1
    if den != 1:
        raise InvalidRadiusError(f"radius {radius} is not a power of 1/{p}")
    return L


@dataclass(frozen=True)
class UltrametricBall:
    """Closed ball ``{x : d(center, x) <= p^(-L)}``, i.e. a shared prefix of length L."""

    prefix: tuple[int, ...]
    base: int = 2

    @property
    def radius(self) -> Fraction:
        return Fraction(1, self.base ** len(self.prefix))

    def contains(self, code: BranchCode) -> bool:
        L = len(self.prefix)
        return code.base == self.base and code.digits[:L] == self.prefix

    @classmethod
    def around(cls, center: BranchCode, radius: Fraction) -> "UltrametricBall":
        L = min(_radius_level(radius, center.base), len(center.digits))
        return cls(center.digits[:L], center.base)


def ball_members(
    codes: Iterable[BranchCode], center: BranchCode, radius: Fraction | int
) -> set[BranchCode]:
    """All codes within ultrametric distance ``radius`` of ``center``."""
    ball = UltrametricBall.around(center, Fraction(radius))
    out = set()
    for c in codes:
        _check_compatible(c, center)
        if ball.contains(c):
            out.add(c)
    return out


def codes_from_strings(strings: Sequence[str], base: int = 2) -> list[BranchCode]:
    return [BranchCode.from_string(s, base) for s in strings]
