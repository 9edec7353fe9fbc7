"""Factorization instances and binary decompositions.

An instance fixes the target integer N, its little-endian bit decomposition,
and the declared factor bit-lengths.  Both factors are odd with a fixed
leading 1 bit, so a factor of declared length L contributes exactly L - 2
free binary variables.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping


class EvenInputError(ValueError):
    """N must be odd: an even N has the trivial factor 2."""


class InstanceTooSmallError(ValueError):
    """No nontrivial odd semiprime fits in the requested bit length."""


class InconsistentLengthsError(ValueError):
    """Factor length overrides are incompatible with the bit length of N."""


def bit_length(n: int) -> int:
    """ceil(log2(n)) for n >= 1; returns 0 for n = 1."""
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    return (n - 1).bit_length()


def factor_lengths(l_n: int) -> tuple[int, int]:
    """Default equal factor bit-lengths (ceil(l_n/2), ceil(l_n/2))."""
    if l_n < 4:
        raise InstanceTooSmallError(f"bit length {l_n} is too small for a nontrivial odd semiprime")
    half = -(-l_n // 2)
    return half, half


@dataclass(frozen=True)
class FactorBitVector:
    """One factor's bit layout: fixed 1 bits at both ends, free bits between.

    ``role`` is "p" or "q"; free variables are named e.g. p1..p{length-2}
    with little-endian weights 2^j.
    """

    role: str
    length: int

    def __post_init__(self):
        if self.role not in ("p", "q"):
            raise ValueError(f"role must be 'p' or 'q', got {self.role!r}")
        if self.length < 2:
            raise ValueError(f"factor length must be >= 2, got {self.length}")

    @property
    def free_variables(self) -> tuple[str, ...]:
        return tuple(f"{self.role}{j}" for j in range(1, self.length - 1))

    def reconstruct(self, assignment: Mapping) -> int:
        """Integer value with the fixed end bits included."""
        value = 1 + (1 << (self.length - 1))
        for j in range(1, self.length - 1):
            bit = assignment[f"{self.role}{j}"]
            if bit not in (0, 1):
                raise ValueError(f"bit {self.role}{j} = {bit!r} not binary")
            value += bit << j
        return value


@dataclass(frozen=True)
class FactorizationInstance:
    """Immutable description of one factorization target."""

    N: int
    L_N: int
    L_p: int
    L_q: int
    n_bits: tuple[int, ...]  # little endian, n_bits[0] is the parity bit

    @property
    def p_vector(self) -> FactorBitVector:
        return FactorBitVector("p", self.L_p)

    @property
    def q_vector(self) -> FactorBitVector:
        return FactorBitVector("q", self.L_q)

    def free_variables(self) -> tuple[str, ...]:
        return self.p_vector.free_variables + self.q_vector.free_variables

    def to_json_dict(self) -> dict:
        return {"N": str(self.N), "L_N": self.L_N, "L_p": self.L_p, "L_q": self.L_q}

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "FactorizationInstance":
        return make_instance(int(data["N"]), L_p=int(data["L_p"]), L_q=int(data["L_q"]))


def make_instance(
    n: int, L_p: int | None = None, L_q: int | None = None
) -> FactorizationInstance:
    """Build an instance for odd n >= 9.

    Default factor lengths follow factor_lengths(bit_length(n)); explicit
    overrides must satisfy L_p + L_q in {L_N, L_N + 1} with both >= 2.
    A length convention that cannot represent the true factors is accepted;
    the built objective then has no zero-energy state.
    """
    if n % 2 == 0:
        raise EvenInputError(f"{n} is even; factor out powers of 2 first")
    if n < 9:
        raise InstanceTooSmallError(f"{n} < 9 admits no odd factor pair with fixed end bits")
    l_n = bit_length(n)
    if (L_p is None) != (L_q is None):
        raise InconsistentLengthsError("override both factor lengths or neither")
    if L_p is None:
        L_p, L_q = factor_lengths(l_n)
    else:
        if L_p < 2 or L_q < 2:
            raise InconsistentLengthsError(f"factor lengths ({L_p}, {L_q}) must both be >= 2")
        if L_p + L_q not in (l_n, l_n + 1):
            raise InconsistentLengthsError(
                f"L_p + L_q = {L_p + L_q} must be {l_n} or {l_n + 1} for a {l_n}-bit N"
            )
    bits = tuple((n >> i) & 1 for i in range(l_n))
    return FactorizationInstance(N=n, L_N=l_n, L_p=L_p, L_q=L_q, n_bits=bits)


def verify_factorization(instance: FactorizationInstance, p: int, q: int) -> bool:
    """True iff p * q equals the instance's N."""
    if p < 1 or q < 1:
        raise ValueError(f"factors must be positive, got ({p}, {q})")
    return p * q == instance.N


def fits_length_convention(instance: FactorizationInstance, p: int, q: int) -> bool:
    """True iff (p, q) is representable under the instance's declared lengths.

    Requires both factors odd with exactly the declared number of bits, in
    either assignment order.
    """

    def matches(a: int, b: int) -> bool:
        return (
            a % 2 == 1
            and b % 2 == 1
            and a.bit_length() == instance.L_p
            and b.bit_length() == instance.L_q
        )

    return matches(p, q) or matches(q, p)
