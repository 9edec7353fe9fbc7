"""Chimera hardware-graph model, heuristic minor embedding, chain-strength
application, and unembedding with chain-break resolution.

The embedder follows the classic heuristic scheme: logical variables are
placed one at a time as chains grown from shortest-path trees, with node
costs exponential in current overuse, then refined by repeated rip-up and
re-placement passes until chains are vertex-disjoint.  Results are
deterministic for a given seed; independent tries use counter-derived
seeds and the first success in try order wins.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .pbf import IsingProgram, NotQuadraticError, PseudoBooleanPolynomial
from .solvers import SampleRecord, SampleSet

class EmbeddingNotFoundError(RuntimeError):
    """No valid embedding was found within the configured number of tries."""


class EmbeddingMismatchError(ValueError):
    """An embedding does not cover the logical program it is applied to."""


class HardwareGraph:
    """Chimera graph C(m, n, t): an m x n grid of K_{t,t} cells.

    Nodes are numbered row-major over cells, shore-major within a cell:
    cell (r, c) occupies ids [(r*n + c)*2t, (r*n + c + 1)*2t), first shore
    then second.  First-shore nodes couple vertically between cells, second
    shore horizontally.
    """

    def __init__(self, m: int, n: int, t: int):
        if m < 1 or n < 1 or t < 1:
            raise ValueError("Chimera parameters must be >= 1")
        self.m = m
        self.n = n
        self.t = t
        self.num_nodes = 2 * t * m * n
        edges = []
        for r in range(m):
            for c in range(n):
                base = (r * n + c) * 2 * t
                for k1 in range(t):
                    for k2 in range(t):
                        edges.append((base + k1, base + t + k2))
                if r + 1 < m:
                    below = ((r + 1) * n + c) * 2 * t
                    for k in range(t):
                        edges.append((base + k, below + k))
                if c + 1 < n:
                    right = (r * n + c + 1) * 2 * t
                    for k in range(t):
                        edges.append((base + t + k, right + t + k))
        self.edges = edges
        self._adjacency: list[set[int]] = [set() for _ in range(self.num_nodes)]
        for u, v in edges:
            self._adjacency[u].add(v)
            self._adjacency[v].add(u)
        # static CSR structure for weighted shortest paths; per-placement
        # node weights become weights on incoming edges
        indptr = [0]
        indices = []
        for u in range(self.num_nodes):
            nbrs = sorted(self._adjacency[u])
            indices.extend(nbrs)
            indptr.append(len(indices))
        self._indptr = np.array(indptr, dtype=np.intp)
        self._indices = np.array(indices, dtype=np.intp)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, node: int) -> set[int]:
        return self._adjacency[node]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adjacency[u]

    def shortest_path_graph(self, node_weight: np.ndarray) -> csr_matrix:
        data = node_weight[self._indices]
        return csr_matrix(
            (data, self._indices, self._indptr), shape=(self.num_nodes, self.num_nodes)
        )

    def __repr__(self) -> str:
        return f"HardwareGraph(C({self.m},{self.n},{self.t}): {self.num_nodes} nodes, {self.num_edges} edges)"


def chimera(m: int, n: int, t: int) -> HardwareGraph:
    """Chimera hardware graph with 2*t*m*n nodes."""
    return HardwareGraph(m, n, t)


@dataclass(frozen=True)
class Embedding:
    """Map from logical variable to its chain of hardware nodes."""

    chains: dict

    def chain(self, var) -> frozenset:
        return self.chains[var]

    def total_physical_qubits(self) -> int:
        return sum(len(c) for c in self.chains.values())

    def max_chain_length(self) -> int:
        return max((len(c) for c in self.chains.values()), default=0)

    def to_json_dict(self) -> dict:
        return {
            "chains": {str(v): sorted(c) for v, c in sorted(self.chains.items(), key=lambda kv: str(kv[0]))},
            "stats": {
                "logical_variables": len(self.chains),
                "physical_qubits": self.total_physical_qubits(),
                "max_chain_length": self.max_chain_length(),
            },
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "Embedding":
        from .pbf import _parse_var

        return cls(
            {_parse_var(v): frozenset(int(x) for x in nodes) for v, nodes in data["chains"].items()}
        )


def interaction_graph(program) -> tuple[list, list[tuple]]:
    """Logical (nodes, edges) of a QUBO or Ising program."""
    if isinstance(program, PseudoBooleanPolynomial):
        if not program.is_quadratic():
            raise NotQuadraticError("interaction graph requires degree <= 2")
        nodes = list(program.variables())
        edges = sorted(m for m in program.terms if len(m) == 2)
    elif isinstance(program, IsingProgram):
        nodes = list(program.variables())
        edges = sorted(program.j)
    else:
        raise TypeError(f"no interaction graph for {type(program).__name__}")
    return nodes, edges


def validate_embedding(emb: Embedding, source_edges: Iterable[tuple], hw: HardwareGraph) -> None:
    """Independent chain validity checker.

    Verifies the three embedding invariants from scratch (disjointness,
    chain connectivity, logical edge coverage) using its own traversal, not
    the embedder's bookkeeping.  Raises ValueError on the first violation.
    """
    seen: dict[int, object] = {}
    for var, chain in emb.chains.items():
        if not chain:
            raise ValueError(f"chain for {var!r} is empty")
        for node in chain:
            if node < 0 or node >= hw.num_nodes:
                raise ValueError(f"chain for {var!r} uses node {node} outside the hardware graph")
            if node in seen:
                raise ValueError(f"node {node} shared by chains {seen[node]!r} and {var!r}")
            seen[node] = var
        # BFS connectivity over the induced subgraph
        members = set(chain)
        frontier = [next(iter(members))]
        reached = {frontier[0]}
        while frontier:
            u = frontier.pop()
            for v in hw.neighbors(u):
                if v in members and v not in reached:
                    reached.add(v)
                    frontier.append(v)
        if reached != members:
            raise ValueError(f"chain for {var!r} is not connected: {sorted(members - reached)} unreachable")
    for u, v in source_edges:
        if u not in emb.chains or v not in emb.chains:
            raise ValueError(f"logical edge ({u!r}, {v!r}) has an unmapped endpoint")
        if not any(hw.has_edge(a, b) for a in emb.chains[u] for b in emb.chains[v]):
            raise ValueError(f"no coupler joins chains of {u!r} and {v!r}")


def _trim_chain(var, chains: dict, usage, adjacency: dict, hw: HardwareGraph) -> None:
    """Drop nodes of one chain not needed for connectivity or neighbor contact.

    Nodes shared with other chains are shed first.
    """
    members = chains[var]
    placed = [u for u in adjacency.get(var, ()) if chains.get(u)]
    changed = True
    while changed and len(members) > 1:
        changed = False
        for node in sorted(members, key=lambda g: (-usage[g], g)):
            rest = members - {node}
            start = next(iter(rest))
            reached = {start}
            stack = [start]
            while stack:
                x = stack.pop()
                for w in hw.neighbors(x):
                    if w in rest and w not in reached:
                        reached.add(w)
                        stack.append(w)
            if len(reached) != len(rest):
                continue
            ok = True
            for u in placed:
                other = chains[u]
                if not any(b in other for a in rest for b in hw.neighbors(a)):
                    ok = False
                    break
            if ok:
                members.discard(node)
                usage[node] -= 1
                changed = True
                break


_HUGE = 1e30


class _Placer:
    """Shared machinery: shortest-path-tree placement with chain-weighted
    node costs, rip-up refinement passes, and targeted perturbation.

    Two placement styles are used.  Sparse graphs relax best with shared
    path growth (``donate=True``: the far half of each connecting path is
    handed to the neighbor's chain) and no trimming until the end.  The
    template-seeded strategies keep whole paths on the placed vertex and
    trim continuously to stay within the template's free space.
    """

    def __init__(self, nodes, adjacency, hw, rng, base=35.0, jitter=0.1,
                 donate=False, trim_during=True, root_weight_per_neighbor=True):
        self.nodes = nodes
        self.adjacency = adjacency
        self.hw = hw
        self.rng = rng
        self.base = base
        self.jitter = jitter
        self.donate = donate
        self.trim_during = trim_during
        self.root_weight_per_neighbor = root_weight_per_neighbor
        self.chains = {v: set() for v in nodes}
        self.usage = np.zeros(hw.num_nodes, dtype=np.int64)
        self.frozen_nodes = np.zeros(hw.num_nodes, dtype=bool)
        self.frozen_vars: set = set()

    def seed_chain(self, var, nodes, frozen=False):
        for g in nodes:
            self.usage[g] += 1
            if frozen:
                self.frozen_nodes[g] = True
        if frozen:
            self.frozen_vars.add(var)
        self.chains[var] = set(nodes)

    def rip(self, var):
        for g in self.chains[var]:
            self.usage[g] -= 1
        self.chains[var] = set()

    def _extend(self, var, items):
        chain = self.chains[var]
        for g in items:
            if g not in chain:
                self.usage[g] += 1
                chain.add(g)

    def place(self, var):
        """Grow var's chain from the min-cost root along shortest-path trees.

        Node costs are exponential in current overuse; nodes of frozen
        chains are barred from path interiors (their chains stay reachable
        as path endpoints).  Small multiplicative jitter breaks ties so
        parallel corridors spread instead of piling onto one route.
        """
        hw, rng, usage = self.hw, self.rng, self.usage
        weight = np.power(self.base, np.minimum(usage, 40.0))
        weight *= 1.0 + self.jitter * rng.random(hw.num_nodes)
        weight[self.frozen_nodes] = _HUGE
        neighbor_chains = [
            (u, self.chains[u]) for u in self.adjacency[var] if self.chains[u]
        ]
        if not neighbor_chains:
            candidates = np.nonzero(~self.frozen_nodes)[0]
            if candidates.size == 0:
                return False
            root = int(candidates[np.argmin(weight[candidates])])
            self._extend(var, [root])
            return True

        graph = hw.shortest_path_graph(weight)
        # root cost: own weight (once, or once per neighbor) plus per
        # neighbor chain the cost of the cheapest connecting path
        total = np.zeros(hw.num_nodes) if self.root_weight_per_neighbor else weight.copy()
        walks = []
        for u, members in neighbor_chains:
            src = sorted(members)
            dist, pred, _ = dijkstra(
                graph, directed=True, indices=src, min_only=True, return_predecessors=True
            )
            if self.root_weight_per_neighbor:
                d = dist.copy()
                d[src] = weight[src]
                total += d
            else:
                interior = dist - weight
                interior[src] = 0.0
                total += interior
            walks.append((u, pred, members))
        total[self.frozen_nodes] = np.inf
        root = int(np.argmin(total))
        if not np.isfinite(total[root]) or total[root] >= _HUGE:
            return False
        self._extend(var, [root])
        for u, pred, members in walks:
            cur = root
            path = []
            while cur not in members:
                if cur != root:
                    path.append(cur)
                nxt = pred[cur]
                if nxt < 0:
                    break
                cur = int(nxt)
            if self.donate and u not in self.frozen_vars and len(path) > 1:
                half = (len(path) + 1) // 2
                self._extend(var, path[:half])
                self._extend(u, path[half:])
            else:
                self._extend(var, path)
        if self.trim_during:
            _trim_chain(var, self.chains, self.usage, self.adjacency, hw)
        return True

    def overfill(self) -> int:
        return int((self.usage > 1).sum())

    def refine(self, movable, passes, stagnation=10):
        """Rip-up and re-place until chains are disjoint.

        Returns the chain map on success, None when the pass budget runs
        out.  After ``stagnation`` passes without improvement, every chain
        covering one randomly chosen contested node (plus a random sample of
        others) is torn out and regrown.
        """
        rng = self.rng
        order = list(movable)
        for var in order:
            if not self.place(var):
                return None
        best = None
        stale = 0
        for _ in range(passes):
            over = self.overfill()
            if over == 0:
                return {v: frozenset(c) for v, c in self.chains.items()}
            if best is None or over < best:
                best = over
                stale = 0
            else:
                stale += 1
            if stale >= stagnation:
                stale = 0
                hot = np.nonzero(self.usage > 1)[0]
                node = int(hot[rng.integers(hot.size)])
                victims = {v for v in order if node in self.chains[v]}
                victims |= {v for v in order if rng.random() < 0.15}
                for v in sorted(victims, key=str):
                    self.rip(v)
                for v in order:
                    if not self.chains[v] and not self.place(v):
                        return None
            for i in rng.permutation(len(order)):
                var = order[i]
                self.rip(var)
                if not self.place(var):
                    return None
        if self.overfill() == 0:
            return {v: frozenset(c) for v, c in self.chains.items()}
        return None


def _triad_slots(hw: HardwareGraph, lanes: int, span: int):
    """Chains of the standard triangular clique layout on a Chimera block.

    Slot (lane, s) is an L of length span+1: first-shore strand s down
    column ``lane`` over rows 0..lane, joined at the diagonal cell to a
    second-shore strand s across row ``lane`` over columns lane..span-1.
    Any two slots meet at a crossing cell, so the layout hosts a complete
    graph on t*lanes vertices.
    """
    t = hw.t
    for lane in range(lanes):
        for s in range(t):
            chain = []
            for r in range(0, lane + 1):
                chain.append((r * hw.n + lane) * 2 * t + s)
            for c in range(lane, span):
                chain.append((lane * hw.n + c) * 2 * t + t + s)
            yield chain


def _strategy_heuristic(nodes, adjacency, hw, rng, max_passes):
    placer = _Placer(
        nodes, adjacency, hw, rng, base=10.0, jitter=0.05,
        donate=True, trim_during=False, root_weight_per_neighbor=False,
    )
    order = [nodes[i] for i in rng.permutation(len(nodes))]
    chains = placer.refine(order, max_passes)
    if chains is None:
        return None
    result = {v: set(c) for v, c in chains.items()}
    for var in sorted(result, key=str):
        _trim_chain(var, result, placer.usage, adjacency, hw)
    return {v: frozenset(c) for v, c in result.items()}


def _strategy_template(nodes, adjacency, hw, rng):
    """Deterministic clique-template embedding for n <= t * min(m, n)."""
    lanes = -(-len(nodes) // hw.t)
    if lanes > min(hw.m, hw.n):
        return None
    placer = _Placer(nodes, adjacency, hw, rng)
    by_degree = sorted(nodes, key=lambda v: (-len(adjacency[v]), str(v)))
    slots = _triad_slots(hw, lanes, lanes)
    for var, chain in zip(by_degree, slots):
        placer.seed_chain(var, chain)
    for var in by_degree:
        _trim_chain(var, placer.chains, placer.usage, adjacency, hw)
    return {v: frozenset(c) for v, c in placer.chains.items()}


def _strategy_hub_template(nodes, adjacency, hw, rng, max_passes):
    """Template arms for the highest-degree vertices, heuristic for the rest.

    Hubs get full-width L chains (complete among themselves and reachable
    from anywhere), then the remaining vertices are placed by the standard
    refinement with hub chains frozen.
    """
    span = min(hw.m, hw.n)
    max_hub_lanes = max(1, span // 2 - 1)
    by_degree = sorted(nodes, key=lambda v: (-len(adjacency[v]), str(v)))
    hub_count = min(len(nodes) - 1, hw.t * max_hub_lanes)
    hubs = by_degree[:hub_count]
    rest = [v for v in nodes if v not in set(hubs)]

    placer = _Placer(nodes, adjacency, hw, rng)
    slots = _triad_slots(hw, -(-len(hubs) // hw.t), span)
    for var, chain in zip(hubs, slots):
        placer.seed_chain(var, chain, frozen=True)
    order = [rest[i] for i in rng.permutation(len(rest))]
    chains = placer.refine(order, max_passes)
    if chains is None:
        return None
    # unfreeze and trim hub arms down to their real contacts
    result = {v: set(c) for v, c in chains.items()}
    for var in hubs:
        _trim_chain(var, result, placer.usage, adjacency, hw)
    return {v: frozenset(c) for v, c in result.items()}


def find_embedding(
    source,
    hw: HardwareGraph,
    seed: int = 0,
    tries: int = 10,
    max_passes: int = 32,
) -> Embedding:
    """Minor-embed a logical graph into the hardware graph.

    ``source`` is either a program (QUBO / Ising) or an iterable of logical
    edges.  Variables are placed one at a time as chains grown from
    shortest-path trees with chain-weighted node costs, then refined by
    rip-up passes until chains are disjoint.  Dense graphs fall back to a
    clique-template initialization (all-pairs L-shaped chains, then trimmed
    to the real edge set) and, past template capacity, to template arms for
    the high-degree core with heuristic placement of the remainder.  Tries
    use counter-derived seeds; the first success in try order is returned.
    Raises EmbeddingNotFoundError after ``tries`` failed restarts.
    """
    if isinstance(source, (PseudoBooleanPolynomial, IsingProgram)):
        nodes, edges = interaction_graph(source)
    else:
        edges = sorted({tuple(sorted(e, key=str)) for e in source})
        nodes = sorted({v for e in edges for v in e}, key=str)
    if not nodes:
        return Embedding({})
    adjacency: dict = {v: [] for v in nodes}
    for u, v in edges:
        if u == v:
            continue
        adjacency[u].append(v)
        adjacency[v].append(u)

    template_capacity = hw.t * min(hw.m, hw.n)
    for try_index in range(tries):
        key = ((int(seed) & (2**64 - 1)) << 64) | try_index
        rng = np.random.Generator(np.random.Philox(key=key))
        if len(nodes) <= 24 or try_index == 0:
            chains = _strategy_heuristic(nodes, adjacency, hw, rng, max_passes)
        elif len(nodes) <= template_capacity:
            chains = _strategy_template(nodes, adjacency, hw, rng)
        else:
            chains = _strategy_hub_template(nodes, adjacency, hw, rng, max_passes)
        if chains is not None:
            emb = Embedding(chains)
            validate_embedding(emb, edges, hw)
            return emb
    raise EmbeddingNotFoundError(
        f"no embedding into C({hw.m},{hw.n},{hw.t}) after {tries} tries "
        f"({len(nodes)} logical variables, {len(edges)} edges)"
    )


@dataclass(frozen=True)
class EmbeddedIsing:
    """Physical Ising program produced by applying an embedding.

    Logical fields are split equally across chain members and each logical
    coupling sits on one deterministic inter-chain coupler; those values are
    compressed by ``scale`` so they lie in [-1, 1].  Every coupler internal
    to a chain is set to ``j_chain`` (applied after scaling, so chain
    couplers keep their full strength).  For chain-consistent states,
    physical energy = scale * logical energy + j_chain * chain_couplers.
    """

    physical: IsingProgram
    embedding: Embedding
    logical: IsingProgram
    j_chain: Fraction
    scale: Fraction
    chain_couplers: int

    def chain_offset(self) -> Fraction:
        return self.j_chain * self.chain_couplers

    def to_json_dict(self) -> dict:
        data = self.embedding.to_json_dict()
        data["stats"]["chain_couplers"] = self.chain_couplers
        data["stats"]["scale"] = str(self.scale)
        data["stats"]["j_chain"] = str(self.j_chain)
        data["physical_ising"] = self.physical.to_text()
        data["logical_ising"] = self.logical.to_text()
        return data

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "EmbeddedIsing":
        return cls(
            physical=IsingProgram.from_text(data["physical_ising"]),
            embedding=Embedding.from_json_dict(data),
            logical=IsingProgram.from_text(data["logical_ising"]),
            j_chain=Fraction(data["stats"]["j_chain"]),
            scale=Fraction(data["stats"]["scale"]),
            chain_couplers=int(data["stats"]["chain_couplers"]),
        )


def embed_ising(
    logical: IsingProgram,
    emb: Embedding,
    hw: HardwareGraph,
    j_chain: Fraction | int = Fraction(-2),
) -> EmbeddedIsing:
    """Apply an embedding to a logical Ising program.

    Raises EmbeddingMismatchError if the embedding does not cover the
    program's variables or fails to join some coupled pair of chains.
    """
    j_chain = Fraction(j_chain)
    if j_chain >= 0:
        raise ValueError(f"j_chain must be negative (ferromagnetic), got {j_chain}")
    for var in logical.variables():
        if var not in emb.chains or not emb.chains[var]:
            raise EmbeddingMismatchError(f"no chain for logical variable {var!r}")

    split_h: dict[int, Fraction] = {}
    for var, value in logical.h.items():
        members = sorted(emb.chains[var])
        share = value / len(members)
        for node in members:
            split_h[node] = split_h.get(node, Fraction(0)) + share

    placed_j: dict[tuple[int, int], Fraction] = {}
    for (u, v), value in logical.j.items():
        couplers = sorted(
            tuple(sorted((a, b)))
            for a in emb.chains[u]
            for b in emb.chains[v]
            if hw.has_edge(a, b)
        )
        if not couplers:
            raise EmbeddingMismatchError(f"no coupler joins chains of {u!r} and {v!r}")
        key = couplers[0]
        placed_j[key] = placed_j.get(key, Fraction(0)) + value

    peak = max(
        [abs(x) for x in split_h.values()] + [abs(x) for x in placed_j.values()],
        default=Fraction(0),
    )
    scale = Fraction(1) if peak <= 1 else 1 / peak
    physical_h = {node: value * scale for node, value in split_h.items()}
    physical_j = {pair: value * scale for pair, value in placed_j.items()}

    chain_couplers = 0
    for var in sorted(emb.chains, key=str):
        members = sorted(emb.chains[var])
        for i, a in enumerate(members):
            for b in members[i + 1 :]:
                if hw.has_edge(a, b):
                    physical_j[(a, b)] = j_chain
                    chain_couplers += 1

    physical = IsingProgram(physical_h, physical_j, logical.offset * scale)
    return EmbeddedIsing(
        physical=physical,
        embedding=emb,
        logical=logical,
        j_chain=j_chain,
        scale=scale,
        chain_couplers=chain_couplers,
    )


def unembed(samples: SampleSet, embedded: EmbeddedIsing) -> SampleSet:
    """Collapse physical samples to logical ones by per-chain majority vote.

    Exact ties resolve to +1.  Records are re-scored exactly against the
    logical program; the fraction of (read, chain) pairs whose members
    disagreed is reported as ``broken_chain_fraction`` in the metadata.
    """
    chains = embedded.embedding.chains
    logical_counts: dict[tuple, int] = {}
    broken_pairs = 0
    total_pairs = 0
    names = sorted(chains, key=str)
    for record in samples:
        spins = []
        for var in names:
            members = chains[var]
            vote = 0
            for node in members:
                vote += record.assignment[node]
            if abs(vote) != len(members):
                broken_pairs += record.occurrences
            total_pairs += record.occurrences
            spins.append(1 if vote >= 0 else -1)
        key = tuple(spins)
        logical_counts[key] = logical_counts.get(key, 0) + record.occurrences

    records = []
    for key, occ in logical_counts.items():
        assignment = dict(zip(names, key))
        records.append(SampleRecord(assignment, embedded.logical.energy(assignment), occ))
    metadata = dict(samples.metadata)
    metadata["unembedded"] = True
    metadata["broken_chain_fraction"] = broken_pairs / total_pairs if total_pairs else 0.0
    return SampleSet(records, metadata)
