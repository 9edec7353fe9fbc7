"""End-to-end pipeline driver, time-to-solution metric, campaign runner,
and scaling-statistics export.

A campaign builds each instance's objective, quadratizes it, optionally
minor-embeds it, samples, decodes every read back to a candidate factor
pair, and re-verifies each success against N (solver output is never
trusted).  Wall-clock analogs of programming and sampling time are
measured in microseconds.
"""

from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from statistics import median
from typing import Mapping, Sequence

from .builders import build_block_table, build_column_table, build_direct, decode_solution, plan_blocks
from .embed import EmbeddingNotFoundError, chimera, embed_ising, find_embedding, unembed
from .model import make_instance, verify_factorization
from .pbf import to_ising
from .solvers import SampleSet, SAParams, Schedule, ScheduleParams, brute_force, schedule_anneal, simulated_annealing
from . import quadratize


class NoSolutionError(RuntimeError):
    """TTS is undefined when no read produced a verified factorization."""


@dataclass
class RunRecord:
    """Outcome of one instance run through the pipeline."""

    n: int
    method: str
    solver: str
    reads: int
    seed: int
    l_n: int
    logical_variables: int
    quadratic_terms: int
    success_count: int
    setup_time_us: int
    sampling_time_us: int
    physical_qubits: int | None = None
    best_pair: tuple[int, int] | None = None
    embedding_found: bool | None = None
    error: str | None = None
    solver_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.success_count > self.reads:
            raise ValueError("success count cannot exceed reads")
        if self.setup_time_us < 0 or self.sampling_time_us < 0:
            raise ValueError("times must be nonnegative")


def tts(record: RunRecord) -> Fraction:
    """Time to solution in microseconds: total time over verified successes.

    Raises NoSolutionError when the run produced no verified factorization
    (the quantity is unbounded, not a number).
    """
    if record.success_count < 1:
        raise NoSolutionError(f"run for N={record.n} produced no verified factorization")
    return Fraction(record.setup_time_us + record.sampling_time_us, record.success_count)


@dataclass(frozen=True)
class TTSEntry:
    n: int
    l_n: int
    reads: int
    solver: str
    seed: int
    tts_us: Fraction | None  # None when undefined (no successes)


@dataclass(frozen=True)
class TTSReport:
    entries: tuple[TTSEntry, ...]

    def for_n(self, n: int) -> TTSEntry:
        for entry in self.entries:
            if entry.n == n:
                return entry
        raise KeyError(n)


@dataclass(frozen=True)
class CampaignConfig:
    """Campaign description; see README for the JSON schema."""

    instances: tuple[int, ...]
    method: str = "block"
    solver: str = "sa"
    reads: int = 10000
    seed: int = 0
    sweeps: int = 64
    t_init: float | None = None
    t_final: float = 0.1
    block_bound: int | None = None
    embed: bool = False
    chimera_shape: tuple[int, int, int] = (16, 16, 4)
    embed_tries: int = 10
    j_chain: int = -2
    schedule_points: int = 32
    temperature: float = 0.2

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "CampaignConfig":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(data) - known
        if extra:
            raise ValueError(f"unknown campaign keys: {sorted(extra)}")
        kwargs = dict(data)
        kwargs["instances"] = tuple(int(n) for n in data["instances"])
        if "chimera_shape" in kwargs:
            kwargs["chimera_shape"] = tuple(kwargs["chimera_shape"])
        return cls(**kwargs)


_BUILDERS = {
    "direct": lambda inst, bound: build_direct(inst),
    "column": lambda inst, bound: build_column_table(inst)[0],
    "block": lambda inst, bound: build_block_table(inst, plan_blocks(inst, max_coeff_bound=bound)),
}


def run_instance(n: int, config: CampaignConfig, seed: int) -> RunRecord:
    """Build, quadratize, optionally embed, sample, decode, verify."""
    if config.method not in _BUILDERS:
        raise ValueError(f"unknown method {config.method!r}")
    if config.solver not in ("brute", "sa", "schedule"):
        raise ValueError(f"unknown solver {config.solver!r}")

    t_setup = time.perf_counter_ns()
    instance = make_instance(n)
    hubo = _BUILDERS[config.method](instance, config.block_bound)
    qubo, _ = quadratize(hubo)
    logical_vars = len(qubo.variables())
    quad_terms = sum(1 for m in qubo.terms if len(m) == 2)

    embedded = None
    physical_qubits = None
    embedding_found = None
    if config.embed or config.solver == "schedule":
        hw = chimera(*config.chimera_shape)
        ising = to_ising(qubo)
        try:
            embedding = find_embedding(ising, hw, seed=seed, tries=config.embed_tries)
            embedded = embed_ising(ising, embedding, hw, j_chain=config.j_chain)
            physical_qubits = embedding.total_physical_qubits()
            embedding_found = True
        except EmbeddingNotFoundError as exc:
            setup_us = (time.perf_counter_ns() - t_setup) // 1000
            return RunRecord(
                n=n, method=config.method, solver=config.solver, reads=config.reads,
                seed=seed, l_n=instance.L_N, logical_variables=logical_vars,
                quadratic_terms=quad_terms, success_count=0,
                setup_time_us=int(setup_us), sampling_time_us=0,
                embedding_found=False, error=str(exc),
            )
    setup_us = (time.perf_counter_ns() - t_setup) // 1000

    solver_params: dict = {}
    if config.solver == "brute":
        samples = brute_force(qubo)
        reads = samples.num_reads()
    elif config.solver == "sa":
        params = SAParams(
            reads=config.reads, sweeps=config.sweeps,
            t_init=config.t_init, t_final=config.t_final, seed=seed,
        )
        solver_params = {"sweeps": config.sweeps, "t_init": config.t_init, "t_final": config.t_final}
        samples = simulated_annealing(qubo, params)
        reads = config.reads
    else:
        schedule = Schedule.linear(config.schedule_points)
        params = ScheduleParams(reads=config.reads, temperature=config.temperature, seed=seed)
        solver_params = {"schedule_points": config.schedule_points, "temperature": config.temperature}
        samples = schedule_anneal(embedded.physical, schedule, params)
        reads = config.reads
    sampling_us = samples.metadata.get("total_sampling_time_us", 0)

    if embedded is not None and config.solver == "schedule":
        samples = unembed(samples, embedded)
        # logical spins back to bits for decoding
        bit_records = []
        for record in samples:
            bits = {v: (s + 1) // 2 for v, s in record.assignment.items()}
            bit_records.append((bits, record.occurrences))
    else:
        bit_records = [(r.assignment, r.occurrences) for r in samples]

    successes = 0
    best_pair = None
    for bits, occurrences in bit_records:
        p, q = decode_solution(bits, instance)
        if verify_factorization(instance, p, q):
            successes += occurrences
            if best_pair is None:
                best_pair = (max(p, q), min(p, q))

    return RunRecord(
        n=n, method=config.method, solver=config.solver, reads=reads, seed=seed,
        l_n=instance.L_N, logical_variables=logical_vars, quadratic_terms=quad_terms,
        success_count=successes, setup_time_us=int(setup_us),
        sampling_time_us=int(sampling_us), physical_qubits=physical_qubits,
        best_pair=best_pair, embedding_found=embedding_found,
        solver_params=solver_params,
    )


def run_campaign(config: CampaignConfig) -> tuple[list[RunRecord], TTSReport]:
    """Run every configured instance; failures are recorded, not raised.

    Instances may run concurrently (FACTORQUBO_THREADS caps the pool);
    per-instance seeds are derived from the config seed and the instance's
    position, so results do not depend on execution order.  Records are
    returned in config order.
    """
    env_cap = os.environ.get("FACTORQUBO_THREADS")
    max_workers = int(env_cap) if env_cap else min(4, max(1, len(config.instances)))
    max_workers = max(1, max_workers)

    def guarded(position: int, n: int) -> RunRecord:
        seed = config.seed + position
        try:
            return run_instance(n, config, seed)
        except Exception as exc:  # per-instance failure, campaign continues
            return RunRecord(
                n=n, method=config.method, solver=config.solver, reads=config.reads,
                seed=seed, l_n=make_instance(n).L_N if n % 2 else 0,
                logical_variables=0, quadratic_terms=0, success_count=0,
                setup_time_us=0, sampling_time_us=0, error=str(exc),
            )

    if not config.instances:
        return [], TTSReport(entries=())
    if max_workers == 1:
        records = [guarded(i, n) for i, n in enumerate(config.instances)]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            records = list(pool.map(guarded, range(len(config.instances)), config.instances))

    entries = []
    for record in records:
        value = tts(record) if record.success_count >= 1 else None
        entries.append(
            TTSEntry(n=record.n, l_n=record.l_n, reads=record.reads,
                     solver=record.solver, seed=record.seed, tts_us=value)
        )
    return records, TTSReport(entries=tuple(entries))


SCALING_COLUMNS = (
    "L_N", "N", "method", "solver", "logical_variables", "quadratic_terms",
    "median_physical_qubits", "reads", "success_count", "setup_time_us",
    "sampling_time_us", "tts_us",
)

# wall-clock columns, excluded from the campaign determinism contract
TIMING_COLUMNS = ("setup_time_us", "sampling_time_us", "tts_us")


def export_scaling(records: Sequence[RunRecord]) -> str:
    """CSV of structural and timing statistics, one row per run record,
    sorted ascending by (L_N, N).

    Requires records from at least two distinct bit lengths, enough to plot
    a scaling trend.  ``median_physical_qubits`` aggregates over all records
    of the same N that carry an embedding.
    """
    lengths = {r.l_n for r in records}
    if len(lengths) < 2:
        raise ValueError(f"need records from >= 2 distinct bit lengths, got {sorted(lengths)}")
    physical: dict[int, list[int]] = {}
    for r in records:
        if r.physical_qubits is not None:
            physical.setdefault(r.n, []).append(r.physical_qubits)

    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SCALING_COLUMNS)
    for r in sorted(records, key=lambda r: (r.l_n, r.n, r.seed)):
        med = median(physical[r.n]) if r.n in physical else ""
        try:
            value = float(tts(r))
        except NoSolutionError:
            value = ""
        writer.writerow([
            r.l_n, r.n, r.method, r.solver, r.logical_variables, r.quadratic_terms,
            med, r.reads, r.success_count, r.setup_time_us, r.sampling_time_us, value,
        ])
    return buffer.getvalue()
