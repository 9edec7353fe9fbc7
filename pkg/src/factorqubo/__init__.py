"""Integer factorization as binary optimization.

Builds HUBO/QUBO/Ising objectives for factoring odd semiprimes, solves them
with exact enumeration or annealing-style samplers, minor-embeds them onto a
Chimera hardware-graph model, and benchmarks time-to-solution scaling.
"""

from .model import (
    FactorBitVector,
    FactorizationInstance,
    bit_length,
    factor_lengths,
    make_instance,
    verify_factorization,
)
from .pbf import (
    IsingProgram,
    PseudoBooleanPolynomial,
    from_ising,
    quadratize,
    to_ising,
)
from .builders import (
    BlockPlan,
    CarryVariable,
    build_block_table,
    build_column_table,
    build_direct,
    decode_solution,
    plan_blocks,
)

__all__ = [
    "FactorBitVector",
    "FactorizationInstance",
    "bit_length",
    "factor_lengths",
    "make_instance",
    "verify_factorization",
    "IsingProgram",
    "PseudoBooleanPolynomial",
    "from_ising",
    "quadratize",
    "to_ising",
    "BlockPlan",
    "CarryVariable",
    "build_block_table",
    "build_column_table",
    "build_direct",
    "decode_solution",
    "plan_blocks",
]

__version__ = "0.1.0"
