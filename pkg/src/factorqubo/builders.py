"""Factorization objectives: direct square, column table, block table.

All three builders emit an exact integer HUBO whose value is 0 precisely at
assignments encoding a factor pair of N (within the instance's length
convention) and strictly positive elsewhere.  Column and block methods add
carry variables sized for the worst case in which every bit of a column sum
is 1.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from .model import FactorizationInstance
from .pbf import PseudoBooleanPolynomial

PBP = PseudoBooleanPolynomial


class PlanMismatchError(ValueError):
    """A block plan does not cover the instance's columns."""


@dataclass(frozen=True)
class CarryVariable:
    """A binary carry absorbing overflow from a column or block sum.

    ``weight`` is the coefficient of the carry inside its emitting equation;
    ``target`` is the absolute column the carry lands in.
    """

    name: str
    source: int
    target: int
    weight: int


@dataclass(frozen=True)
class BlockPlan:
    """Partition of columns 1 .. L_N-1 into contiguous blocks.

    ``carry_counts[k]`` is the number of carries block k emits, computed from
    the all-ones worst case of its weighted column sums.
    """

    blocks: tuple[tuple[int, int], ...]  # half-open [lo, hi) column ranges
    carry_counts: tuple[int, ...]
    max_coeff_bound: int

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(hi - lo for lo, hi in self.blocks)

    @property
    def total_carries(self) -> int:
        return sum(self.carry_counts)


def _column_terms(instance: FactorizationInstance) -> dict[int, list[tuple]]:
    """Product-bit summands per column, fixed end bits folded in.

    Each summand is a monomial (tuple of free-variable names); the empty
    tuple is a constant 1 from a product of two fixed bits.
    """
    columns: dict[int, list[tuple]] = defaultdict(list)
    for j in range(instance.L_p):
        for k in range(instance.L_q):
            mono = []
            if 0 < j < instance.L_p - 1:
                mono.append(f"p{j}")
            if 0 < k < instance.L_q - 1:
                mono.append(f"q{k}")
            columns[j + k].append(tuple(sorted(mono)))
    return columns


def _register_bits(instance: FactorizationInstance, poly_registry: dict) -> None:
    for name in instance.p_vector.free_variables:
        poly_registry[name] = "p"
    for name in instance.q_vector.free_variables:
        poly_registry[name] = "q"


def build_direct(instance: FactorizationInstance) -> PBP:
    """Objective (N - p*q)^2 expanded over the free factor bits.

    Degree <= 4; the square makes the zero set exactly the factor pairs.
    """
    registry: dict = {}
    _register_bits(instance, registry)
    p_poly = PBP.constant(1 + (1 << (instance.L_p - 1)))
    for j in range(1, instance.L_p - 1):
        p_poly = p_poly + (1 << j) * PBP.variable(f"p{j}")
    q_poly = PBP.constant(1 + (1 << (instance.L_q - 1)))
    for k in range(1, instance.L_q - 1):
        q_poly = q_poly + (1 << k) * PBP.variable(f"q{k}")
    diff = PBP.constant(instance.N) - p_poly * q_poly
    objective = diff.square()
    objective.registry.update(registry)
    return objective


def build_column_table(instance: FactorizationInstance) -> tuple[PBP, list[CarryVariable]]:
    """Sum of squared per-column residual equations.

    Column i (1 <= i <= L_N-1) equates its product bits plus incoming
    carries, minus outgoing carries weighted 2^t, to the bit n_i.  Carry
    c{i}_{j} is generated in column i with weight 2^(j-i) and lands in
    column j.  Outgoing carries never target columns past L_N-1: the product
    of two in-range factors cannot overflow N's bit length.
    """
    columns = _column_terms(instance)
    incoming: dict[int, list[str]] = defaultdict(list)
    carries: list[CarryVariable] = []
    objective = PBP.zero()
    registry: dict = {}
    _register_bits(instance, registry)

    for i in range(1, instance.L_N):
        summands = columns.get(i, [])
        s_max = len(summands) + len(incoming[i])
        n_carries = min((s_max >> 1).bit_length(), instance.L_N - 1 - i)
        residual = PBP.constant(-instance.n_bits[i])
        for mono in summands:
            residual = residual + PBP({mono: 1})
        for name in incoming[i]:
            residual = residual + PBP.variable(name)
        for t in range(1, n_carries + 1):
            carry = CarryVariable(name=f"c{i}_{i + t}", source=i, target=i + t, weight=1 << t)
            carries.append(carry)
            registry[carry.name] = "carry"
            incoming[carry.target].append(carry.name)
            residual = residual - carry.weight * PBP.variable(carry.name)
        objective = objective + residual.square()

    objective.registry.update(registry)
    return objective, carries


def plan_blocks(
    instance: FactorizationInstance,
    max_coeff_bound: int | None = None,
    max_width: int | None = None,
) -> BlockPlan:
    """Greedy contiguous block partition of columns 1 .. L_N-1.

    Starting at column 1, the current block is extended while the projected
    largest squared-equation coefficient (2^(W + carries))^2 stays within
    ``max_coeff_bound`` (default L_N**3).  Width-1 blocks are always
    accepted.  ``max_width=1`` forces single-column blocks, which reproduces
    the column method's carry counts.
    """
    if max_coeff_bound is None:
        max_coeff_bound = instance.L_N**3
    if max_coeff_bound < 4:
        raise ValueError(f"max_coeff_bound must be >= 4, got {max_coeff_bound}")

    columns = _column_terms(instance)
    base = {i: len(columns.get(i, [])) for i in range(1, instance.L_N)}
    incoming_count: dict[int, int] = defaultdict(int)

    def carry_count(lo: int, width: int) -> int:
        s_max = sum(
            (base.get(c, 0) + incoming_count[c]) << (c - lo) for c in range(lo, lo + width)
        )
        raw = (s_max >> width).bit_length()
        return min(raw, max(0, instance.L_N - lo - width))

    blocks: list[tuple[int, int]] = []
    counts: list[int] = []
    lo = 1
    while lo <= instance.L_N - 1:
        width = 1
        while lo + width <= instance.L_N - 1:
            if max_width is not None and width + 1 > max_width:
                break
            grown = width + 1
            projected = (1 << (grown + carry_count(lo, grown))) ** 2
            if projected > max_coeff_bound:
                break
            width = grown
        emitted = carry_count(lo, width)
        blocks.append((lo, lo + width))
        counts.append(emitted)
        for t in range(emitted):
            incoming_count[lo + width + t] += 1
        lo += width

    return BlockPlan(blocks=tuple(blocks), carry_counts=tuple(counts), max_coeff_bound=max_coeff_bound)


def block_carries(instance: FactorizationInstance, plan: BlockPlan) -> list[CarryVariable]:
    """Carry variables c1, c2, ... in block emission order for a plan."""
    carries: list[CarryVariable] = []
    index = 1
    for (lo, hi), count in zip(plan.blocks, plan.carry_counts):
        width = hi - lo
        for t in range(count):
            carries.append(
                CarryVariable(name=f"c{index}", source=lo, target=lo + width + t, weight=1 << (width + t))
            )
            index += 1
    return carries


def build_block_table(instance: FactorizationInstance, plan: BlockPlan | None = None) -> PBP:
    """Sum of squared per-block residual equations for a block plan.

    Each block contributes one equation: its weighted column sums plus
    incoming carries, minus outgoing carries weighted 2^(W+t), equal the
    matching weighted bits of N.
    """
    if plan is None:
        plan = plan_blocks(instance)
    if not plan.blocks or plan.blocks[0][0] != 1 or plan.blocks[-1][1] != instance.L_N:
        raise PlanMismatchError(f"plan {plan.blocks} does not cover columns 1..{instance.L_N - 1}")
    for (_, hi), (lo2, _) in zip(plan.blocks, plan.blocks[1:]):
        if hi != lo2:
            raise PlanMismatchError(f"plan {plan.blocks} is not contiguous")

    columns = _column_terms(instance)
    carries = block_carries(instance, plan)
    incoming: dict[int, list[CarryVariable]] = defaultdict(list)
    for carry in carries:
        incoming[carry.target].append(carry)

    registry: dict = {}
    _register_bits(instance, registry)
    for carry in carries:
        registry[carry.name] = "carry"

    objective = PBP.zero()
    carry_iter = iter(carries)
    for (lo, hi), count in zip(plan.blocks, plan.carry_counts):
        width = hi - lo
        residual = PBP.zero()
        target = 0
        for col in range(lo, hi):
            shift = col - lo
            for mono in columns.get(col, []):
                residual = residual + (1 << shift) * PBP({mono: 1})
            for carry in incoming[col]:
                residual = residual + (1 << shift) * PBP.variable(carry.name)
            target += instance.n_bits[col] << shift
        for _ in range(count):
            carry = next(carry_iter)
            residual = residual - carry.weight * PBP.variable(carry.name)
        objective = objective + (residual - target).square()

    objective.registry.update(registry)
    return objective


def decode_solution(assignment, instance: FactorizationInstance) -> tuple[int, int]:
    """Reconstruct (p, q) from an assignment of the free factor bits.

    Carries, ancillas, and any other variables present are ignored.
    """
    return (
        instance.p_vector.reconstruct(assignment),
        instance.q_vector.reconstruct(assignment),
    )
