"""Ground-state search: exact enumeration, simulated annealing, and a
schedule-driven classical annealing analog.

All samplers share the same contracts: deterministic output for a given
seed, reads executed in fixed-size chunks with counter-derived random
streams (so chunks may run in any order or in parallel without changing the
merged result), and every recorded energy re-evaluated exactly against the
input program.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from .pbf import (
    IncompleteAssignmentError,
    IsingProgram,
    NotQuadraticError,
    PseudoBooleanPolynomial,
    WrongVariableDomainError,
    _parse_var,
    to_ising,
)

# Reads are processed in fixed-size chunks, each with its own counter-keyed
# random stream; the partition depends only on read index, so sequential and
# parallel execution merge to identical SampleSets.
CHUNK_READS = 4096

# metadata keys excluded from the determinism contract (wall-clock values)
TIMING_KEYS = ("total_sampling_time_us", "per_read_us")


class TooManyVariablesError(ValueError):
    """Program exceeds the enumeration cap."""


@dataclass(frozen=True)
class SAParams:
    """Simulated annealing parameters.

    ``t_init=None`` defaults to the largest absolute coefficient of the
    program being solved; the ladder is geometric from t_init to t_final
    with one full sweep per rung.
    """

    reads: int = 1000
    sweeps: int = 64
    t_init: float | None = None
    t_final: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.reads < 1:
            raise ValueError("reads must be >= 1")
        if self.sweeps < 1:
            raise ValueError("sweeps must be >= 1")
        if self.t_final <= 0 or (self.t_init is not None and self.t_init <= 0):
            raise ValueError("temperatures must be strictly positive")


@dataclass(frozen=True)
class ScheduleParams:
    """Parameters for the schedule-driven annealing analog."""

    reads: int = 1000
    sweeps_per_point: int = 1
    temperature: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.reads < 1 or self.sweeps_per_point < 1:
            raise ValueError("reads and sweeps_per_point must be >= 1")
        if self.temperature <= 0:
            raise ValueError("temperature must be strictly positive")


@dataclass(frozen=True)
class Schedule:
    """Annealing schedule: transverse weight A(s) and problem weight B(s)
    tabulated on a grid of s in [0, 1].

    The constructor enforces the monotone shape (A non-increasing, B
    non-decreasing, both nonnegative); endpoint dominance A(0) > B(0) and
    A(1) < B(1) is checked by validate_shape, which file loading applies.
    Degenerate schedules (e.g. B identically 0) remain constructible for
    baseline comparisons.  ``t_qa_us`` is the nominal anneal duration and is
    metadata only.
    """

    s: tuple[float, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]
    t_qa_us: float = 1.0

    def __post_init__(self):
        if not (len(self.s) == len(self.a) == len(self.b)) or len(self.s) < 2:
            raise ValueError("schedule needs >= 2 aligned grid points")
        if self.s[0] != 0.0 or self.s[-1] != 1.0 or any(
            x >= y for x, y in zip(self.s, self.s[1:])
        ):
            raise ValueError("s grid must increase strictly from 0 to 1")
        if any(v < 0 for v in self.a) or any(v < 0 for v in self.b):
            raise ValueError("A and B must be nonnegative")
        if any(x < y for x, y in zip(self.a, self.a[1:])):
            raise ValueError("A(s) must be non-increasing")
        if any(x > y for x, y in zip(self.b, self.b[1:])):
            raise ValueError("B(s) must be non-decreasing")

    def validate_shape(self) -> None:
        if not (self.a[0] > self.b[0] and self.a[-1] < self.b[-1]):
            raise ValueError("schedule must start transverse-dominated and end problem-dominated")

    @classmethod
    def linear(cls, points: int = 32, t_qa_us: float = 1.0) -> "Schedule":
        grid = tuple(i / (points - 1) for i in range(points))
        return cls(s=grid, a=tuple(1.0 - x for x in grid), b=grid, t_qa_us=t_qa_us)

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Schedule":
        sched = cls(
            s=tuple(float(x) for x in data["s"]),
            a=tuple(float(x) for x in data["A"]),
            b=tuple(float(x) for x in data["B"]),
            t_qa_us=float(data.get("t_qa_us", 1.0)),
        )
        sched.validate_shape()
        return sched

    def to_json_dict(self) -> dict:
        return {"s": list(self.s), "A": list(self.a), "B": list(self.b), "t_qa_us": self.t_qa_us}


@dataclass(frozen=True)
class SampleRecord:
    assignment: dict
    energy: object  # int or Fraction, exact
    occurrences: int


class SampleSet:
    """Multiset of sampled states, sorted ascending by energy.

    ``metadata`` records the solver identity and parameters; wall-clock
    fields (TIMING_KEYS) are excluded from canonical_bytes so determinism
    checks can ignore them.
    """

    def __init__(self, records: list[SampleRecord], metadata: dict):
        self.records = sorted(
            records, key=lambda r: (r.energy, tuple(sorted(r.assignment.items(), key=lambda kv: str(kv[0]))))
        )
        self.metadata = metadata

    @property
    def first(self) -> SampleRecord:
        return self.records[0]

    def num_reads(self) -> int:
        return sum(r.occurrences for r in self.records)

    def lowest_energy(self):
        return self.records[0].energy

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def to_json_dict(self) -> dict:
        return {
            "records": [
                {
                    "assignment": {str(k): int(v) for k, v in sorted(r.assignment.items(), key=lambda kv: str(kv[0]))},
                    "energy": str(r.energy),
                    "occurrences": r.occurrences,
                }
                for r in self.records
            ],
            "metadata": self.metadata,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "SampleSet":
        records = [
            SampleRecord(
                assignment={_parse_var(k): v for k, v in entry["assignment"].items()},
                energy=_exact(Fraction(entry["energy"])),
                occurrences=int(entry["occurrences"]),
            )
            for entry in data["records"]
        ]
        return cls(records, dict(data["metadata"]))

    def canonical_bytes(self) -> bytes:
        payload = self.to_json_dict()
        payload["metadata"] = {
            k: v for k, v in sorted(payload["metadata"].items()) if k not in TIMING_KEYS
        }
        return json.dumps(payload, sort_keys=True).encode()


def _exact(value: Fraction):
    return int(value) if value.denominator == 1 else value


# -- energy evaluation -------------------------------------------------------


def energy(program, state: Mapping):
    """Exact objective value of a full state, domain checked.

    QUBO/HUBO programs take {0,1} bits, Ising programs take {-1,+1} spins.
    """
    if isinstance(program, IsingProgram):
        return _exact(program.energy(state))
    if isinstance(program, PseudoBooleanPolynomial):
        for v in program.variables():
            if v not in state:
                raise IncompleteAssignmentError(v)
            if state[v] not in (0, 1):
                raise WrongVariableDomainError(f"bit {v!r} = {state[v]!r} not in {{0,1}}")
        return program.evaluate(state)
    raise TypeError(f"cannot evaluate {type(program).__name__}")


def _scaled_integer_terms(program):
    """Program as (names, [(var indices, int coeff)], int offset, denominator).

    Multiplying through by the lcm of coefficient denominators keeps the
    vectorized enumeration exact; energies are coeff/denominator.
    """
    if isinstance(program, PseudoBooleanPolynomial):
        names = list(program.variables())
        raw = [(mono, c) for mono, c in program.terms.items()]
        spin = False
    elif isinstance(program, IsingProgram):
        names = list(program.variables())
        raw = [((v,), c) for v, c in program.h.items()]
        raw += [(pair, c) for pair, c in program.j.items()]
        raw.append(((), program.offset))
        spin = True
    else:
        raise TypeError(f"cannot enumerate {type(program).__name__}")
    denom = 1
    for _, c in raw:
        if isinstance(c, Fraction):
            denom = denom * c.denominator // math.gcd(denom, c.denominator)
    index = {v: i for i, v in enumerate(names)}
    terms = []
    offset = 0
    for mono, c in raw:
        scaled = int(c * denom)
        if mono:
            terms.append((tuple(index[v] for v in mono), scaled))
        else:
            offset += scaled
    return names, terms, offset, denom, spin


def brute_force(
    program, max_variables: int = 26, full_spectrum: bool = False
) -> SampleSet:
    """Exhaustive enumeration oracle.

    Returns the exact ground-state set, or the complete spectrum when
    ``full_spectrum`` is set (allowed up to 20 variables).  Raises
    TooManyVariablesError above the cap.
    """
    names, terms, offset, denom, spin = _scaled_integer_terms(program)
    n = len(names)
    if n > max_variables:
        raise TooManyVariablesError(f"{n} variables exceeds cap {max_variables}")
    if full_spectrum and n > 20:
        raise TooManyVariablesError(f"full spectrum capped at 20 variables, got {n}")

    t0 = time.perf_counter_ns()
    total = 1 << n
    ground_scaled: int | None = None
    ground_states: list[int] = []
    spectrum: list[tuple[int, int]] = []

    bound = sum(abs(c) for _, c in terms) + abs(offset)
    if bound >= 1 << 62:
        raise ValueError("coefficients too large for exact enumeration")

    chunk = min(total, 1 << 16)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.uint64)
        cols = [((idx >> np.uint64(k)) & np.uint64(1)).astype(np.int64) for k in range(n)]
        if spin:
            cols = [2 * c - 1 for c in cols]
        energies = np.full(idx.shape, offset, dtype=np.int64)
        for members, coeff in terms:
            acc = cols[members[0]].copy()
            for m in members[1:]:
                acc *= cols[m]
            energies += coeff * acc
        if full_spectrum:
            spectrum.extend(zip(idx.tolist(), energies.tolist()))
        lo = int(energies.min()) if energies.size else offset
        if ground_scaled is None or lo < ground_scaled:
            ground_scaled = lo
            ground_states = []
        if lo == ground_scaled:
            ground_states.extend(idx[energies == ground_scaled].tolist())

    def state_assignment(code: int) -> dict:
        bits = [(code >> k) & 1 for k in range(n)]
        if spin:
            bits = [2 * b - 1 for b in bits]
        return dict(zip(names, bits))

    if full_spectrum:
        records = [
            SampleRecord(state_assignment(code), _exact(Fraction(e, denom)), 1)
            for code, e in spectrum
        ]
    else:
        records = [
            SampleRecord(state_assignment(code), _exact(Fraction(ground_scaled, denom)), 1)
            for code in ground_states
        ]
    elapsed_us = (time.perf_counter_ns() - t0) // 1000
    metadata = {
        "solver": "brute_force",
        "num_states": total,
        "full_spectrum": full_spectrum,
        "ground_energy": str(_exact(Fraction(ground_scaled, denom))),
        "total_sampling_time_us": int(elapsed_us),
        "per_read_us": elapsed_us / max(total, 1),
    }
    return SampleSet(records, metadata)


# -- Metropolis engines ------------------------------------------------------


def _spin_system(program):
    """Float spin-domain arrays (names, h, edge index/weight arrays, binary?)."""
    if isinstance(program, PseudoBooleanPolynomial):
        if not program.is_quadratic():
            raise NotQuadraticError("annealing requires a QUBO (degree <= 2)")
        ising = to_ising(program)
        names = list(program.variables())
        binary = True
    elif isinstance(program, IsingProgram):
        ising = program
        names = list(ising.variables())
        binary = False
    else:
        raise TypeError(f"cannot anneal {type(program).__name__}")
    index = {v: i for i, v in enumerate(names)}
    h = np.zeros(len(names))
    for v, value in ising.h.items():
        h[index[v]] = float(value)
    iu = np.array([index[u] for u, _ in ising.j], dtype=np.intp)
    jv = np.array([index[v] for _, v in ising.j], dtype=np.intp)
    w = np.array([float(value) for value in ising.j.values()])
    return names, h, iu, jv, w, binary


def _neighbor_lists(n, iu, jv, w):
    nbr_idx = [[] for _ in range(n)]
    nbr_w = [[] for _ in range(n)]
    for a, b, weight in zip(iu, jv, w):
        nbr_idx[a].append(b)
        nbr_w[a].append(weight)
        nbr_idx[b].append(a)
        nbr_w[b].append(weight)
    return (
        [np.array(ix, dtype=np.intp) for ix in nbr_idx],
        [np.array(ws) for ws in nbr_w],
    )


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    # counter-based stream: Philox keyed by (seed, chunk)
    key = ((int(seed) & (2**64 - 1)) << 64) | chunk_index
    return np.random.Generator(np.random.Philox(key=key))


def _chunk_bounds(reads: int):
    return [(lo, min(lo + CHUNK_READS, reads)) for lo in range(0, reads, CHUNK_READS)]


def _aggregate(counts: dict, states: np.ndarray):
    for row in states:
        key = row.tobytes()
        counts[key] = counts.get(key, 0) + 1


def _records_from_counts(counts, names, program, binary, n):
    records = []
    for key, occ in counts.items():
        spins = np.frombuffer(key, dtype=np.int8, count=n)
        if binary:
            assignment = {v: int((s + 1) // 2) for v, s in zip(names, spins)}
        else:
            assignment = {v: int(s) for v, s in zip(names, spins)}
        records.append(SampleRecord(assignment, energy(program, assignment), occ))
    return records


def simulated_annealing(program, params: SAParams) -> SampleSet:
    """Independent-restart single-spin-flip Metropolis over a geometric
    temperature ladder.

    Each read starts from a random state and performs ``sweeps`` full
    Metropolis sweeps, one per ladder rung; moves with energy gain are
    always accepted, uphill moves with probability exp(-delta/T).  Output is
    deterministic for a given (program, params) pair.
    """
    names, h, iu, jv, w, binary = _spin_system(program)
    n = len(names)
    t0 = time.perf_counter_ns()

    t_init = params.t_init
    if t_init is None:
        t_init = float(
            program.max_abs_coefficient() if not isinstance(program, IsingProgram) else program.max_abs_coefficient()
        )
        if t_init <= 0:
            t_init = 1.0
    t_init = max(t_init, params.t_final)
    temps = np.geomspace(t_init, params.t_final, params.sweeps)
    nbr_idx, nbr_w = _neighbor_lists(n, iu, jv, w)

    counts: dict[bytes, int] = {}
    for chunk_index, (lo, hi) in enumerate(_chunk_bounds(params.reads)):
        m = hi - lo
        rng = _chunk_rng(params.seed, chunk_index)
        if n == 0:
            counts[b""] = counts.get(b"", 0) + m
            continue
        spins = (rng.integers(0, 2, size=(m, n), dtype=np.int8) * 2 - 1).astype(np.int8)
        fields = np.tile(h, (m, 1))
        for a, b, weight in zip(iu, jv, w):
            fields[:, a] += weight * spins[:, b]
            fields[:, b] += weight * spins[:, a]
        for t in temps:
            inv_t = 1.0 / t
            for k in range(n):
                u = rng.random(m)
                delta = -2.0 * spins[:, k] * fields[:, k]
                accepted = u < np.exp(np.minimum(-delta * inv_t, 0.0))
                rows = np.nonzero(accepted)[0]
                if rows.size:
                    spins[rows, k] = -spins[rows, k]
                    if nbr_idx[k].size:
                        fields[np.ix_(rows, nbr_idx[k])] += (
                            2.0 * spins[rows, k]
                        )[:, None] * nbr_w[k][None, :]
        _aggregate(counts, spins)

    records = _records_from_counts(counts, names, program, binary, n)
    elapsed_us = (time.perf_counter_ns() - t0) // 1000
    metadata = {
        "solver": "simulated_annealing",
        "seed": params.seed,
        "reads": params.reads,
        "sweeps": params.sweeps,
        "t_init": float(t_init),
        "t_final": params.t_final,
        "chunk_reads": CHUNK_READS,
        "total_sampling_time_us": int(elapsed_us),
        "per_read_us": elapsed_us / params.reads,
    }
    return SampleSet(records, metadata)


def schedule_anneal(ising: IsingProgram, schedule: Schedule, params: ScheduleParams) -> SampleSet:
    """Classical spin-vector analog of schedule-driven annealing.

    Each spin is a planar angle theta; the relaxed energy at schedule point
    s is -A(s) * sum(sin theta) + B(s) * H_P(cos theta).  Angles evolve by
    Metropolis moves at fixed temperature while s advances 0 -> 1 over the
    schedule grid; final spins are sign(cos theta) with ties resolved to +1.
    This is a sampling device for exercising schedule structure, not a
    hardware-fidelity model.
    """
    if not isinstance(ising, IsingProgram):
        raise TypeError("schedule_anneal operates on IsingProgram")
    names, h, iu, jv, w, _ = _spin_system(ising)
    n = len(names)
    t0 = time.perf_counter_ns()
    nbr_idx, nbr_w = _neighbor_lists(n, iu, jv, w)
    inv_t = 1.0 / params.temperature

    counts: dict[bytes, int] = {}
    for chunk_index, (lo, hi) in enumerate(_chunk_bounds(params.reads)):
        m = hi - lo
        rng = _chunk_rng(params.seed, chunk_index)
        if n == 0:
            counts[b""] = counts.get(b"", 0) + m
            continue
        theta = np.full((m, n), math.pi / 2)
        cosines = np.cos(theta)
        sines = np.sin(theta)
        fields = np.tile(h, (m, 1))
        for a, b, weight in zip(iu, jv, w):
            fields[:, a] += weight * cosines[:, b]
            fields[:, b] += weight * cosines[:, a]
        for point in range(len(schedule.s)):
            a_s = schedule.a[point]
            b_s = schedule.b[point]
            for _ in range(params.sweeps_per_point):
                for k in range(n):
                    proposal = rng.uniform(0.0, math.pi, m)
                    u = rng.random(m)
                    cos_new = np.cos(proposal)
                    sin_new = np.sin(proposal)
                    delta = -a_s * (sin_new - sines[:, k]) + b_s * (
                        cos_new - cosines[:, k]
                    ) * fields[:, k]
                    accepted = u < np.exp(np.minimum(-delta * inv_t, 0.0))
                    rows = np.nonzero(accepted)[0]
                    if rows.size:
                        shift = cos_new[rows] - cosines[rows, k]
                        theta[rows, k] = proposal[rows]
                        cosines[rows, k] = cos_new[rows]
                        sines[rows, k] = sin_new[rows]
                        if nbr_idx[k].size:
                            fields[np.ix_(rows, nbr_idx[k])] += shift[:, None] * nbr_w[k][None, :]
        spins = np.where(cosines >= 0.0, 1, -1).astype(np.int8)
        _aggregate(counts, spins)

    records = _records_from_counts(counts, names, ising, False, n)
    elapsed_us = (time.perf_counter_ns() - t0) // 1000
    metadata = {
        "solver": "schedule_anneal",
        "seed": params.seed,
        "reads": params.reads,
        "sweeps_per_point": params.sweeps_per_point,
        "temperature": params.temperature,
        "schedule_points": len(schedule.s),
        "t_qa_us": schedule.t_qa_us,
        "chunk_reads": CHUNK_READS,
        "total_sampling_time_us": int(elapsed_us),
        "per_read_us": elapsed_us / params.reads,
    }
    return SampleSet(records, metadata)
