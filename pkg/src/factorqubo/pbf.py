"""Multilinear pseudo-Boolean polynomial algebra.

A polynomial over named {0,1} variables is stored as a map from monomials to
exact coefficients.  A monomial is a sorted tuple of distinct variable names;
the empty tuple is the constant term.  Idempotence (x*x = x) is applied on
construction, so every stored polynomial is multilinear.  Coefficients are
Python ints, falling back to fractions.Fraction when a denominator appears.

A QUBO is the degree <= 2 special case.  Spin-domain programs live in
IsingProgram; to_ising / from_ising apply the exact change of variables
x = (sigma + 1) / 2 in rational arithmetic.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterable, Mapping

Var = Hashable
Monomial = tuple
Coeff = "int | Fraction"


class IncompleteAssignmentError(KeyError):
    """An assignment is missing a variable required for evaluation."""


class NotQuadraticError(ValueError):
    """The operation requires degree <= 2 but got a higher-order polynomial."""


class WrongVariableDomainError(ValueError):
    """A state used values outside the program's variable domain."""


def _canon(c):
    """Collapse integral Fractions back to int; reject floats."""
    if isinstance(c, Fraction):
        return int(c) if c.denominator == 1 else c
    if isinstance(c, int):
        return c
    raise TypeError(f"coefficients must be int or Fraction, got {type(c).__name__}")


def _monomial(variables) -> Monomial:
    return tuple(sorted(set(variables)))


class PseudoBooleanPolynomial:
    """Exact multilinear polynomial over binary variables.

    Values are immutable by convention: all operations return new objects.
    ``registry`` carries optional variable metadata (e.g. whether a name is a
    factor bit, a carry, or an ancilla) and is merged through arithmetic.
    """

    __slots__ = ("terms", "registry")

    def __init__(self, terms: Mapping | None = None, registry: Mapping | None = None):
        canon: dict = {}
        for mono, coeff in (terms or {}).items():
            key = _monomial(mono)
            c = _canon(coeff)
            acc = canon.get(key, 0) + c
            if acc:
                canon[key] = _canon(acc)
            elif key in canon:
                del canon[key]
        self.terms = canon
        self.registry = dict(registry or {})

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls) -> "PseudoBooleanPolynomial":
        return cls()

    @classmethod
    def constant(cls, value) -> "PseudoBooleanPolynomial":
        return cls({(): value} if value else {})

    @classmethod
    def variable(cls, name: Var, kind: str | None = None) -> "PseudoBooleanPolynomial":
        registry = {name: kind} if kind is not None else {}
        return cls({(name,): 1}, registry)

    @classmethod
    def _raw(cls, terms: dict, registry: dict) -> "PseudoBooleanPolynomial":
        # trusted path: terms already canonical
        poly = cls.__new__(cls)
        poly.terms = terms
        poly.registry = registry
        return poly

    # -- inspection --------------------------------------------------------

    def degree(self) -> int:
        return max((len(m) for m in self.terms), default=0)

    def is_quadratic(self) -> bool:
        return self.degree() <= 2

    def variables(self) -> tuple:
        seen = set()
        for mono in self.terms:
            seen.update(mono)
        seen.update(self.registry)
        return tuple(sorted(seen))

    def coefficient(self, variables=()) :
        return self.terms.get(_monomial(variables), 0)

    def max_abs_coefficient(self, include_constant: bool = False):
        vals = [abs(c) for m, c in self.terms.items() if m or include_constant]
        return max(vals, default=0)

    def __len__(self) -> int:
        return len(self.terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PseudoBooleanPolynomial):
            return NotImplemented
        return self.terms == other.terms

    __hash__ = None

    def __repr__(self) -> str:
        if not self.terms:
            return "PseudoBooleanPolynomial(0)"
        parts = []
        for mono in sorted(self.terms, key=lambda m: (len(m), m)):
            c = self.terms[mono]
            name = "*".join(str(v) for v in mono) if mono else "1"
            parts.append(f"{c}*{name}")
        return f"PseudoBooleanPolynomial({' + '.join(parts)})"

    # -- arithmetic --------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, PseudoBooleanPolynomial):
            return other
        if isinstance(other, (int, Fraction)):
            return PseudoBooleanPolynomial.constant(other)
        return None

    def __add__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        terms = dict(self.terms)
        for mono, c in rhs.terms.items():
            acc = terms.get(mono, 0) + c
            if acc:
                terms[mono] = _canon(acc)
            elif mono in terms:
                del terms[mono]
        return PseudoBooleanPolynomial._raw(terms, {**self.registry, **rhs.registry})

    __radd__ = __add__

    def __neg__(self):
        return PseudoBooleanPolynomial._raw(
            {m: -c for m, c in self.terms.items()}, dict(self.registry)
        )

    def __sub__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return self + (-rhs)

    def __rsub__(self, other):
        rhs = self._coerce(other)
        if rhs is None:
            return NotImplemented
        return rhs + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            if not other:
                return PseudoBooleanPolynomial._raw({}, dict(self.registry))
            return PseudoBooleanPolynomial._raw(
                {m: _canon(c * other) for m, c in self.terms.items()}, dict(self.registry)
            )
        if not isinstance(other, PseudoBooleanPolynomial):
            return NotImplemented
        terms: dict = {}
        for m1, c1 in self.terms.items():
            s1 = set(m1)
            for m2, c2 in other.terms.items():
                key = tuple(sorted(s1 | set(m2)))
                acc = terms.get(key, 0) + c1 * c2
                if acc:
                    terms[key] = _canon(acc)
                elif key in terms:
                    del terms[key]
        return PseudoBooleanPolynomial._raw(terms, {**self.registry, **other.registry})

    __rmul__ = __mul__

    def square(self) -> "PseudoBooleanPolynomial":
        """Multilinear expansion of self**2, with x**2 -> x applied."""
        return self * self

    # -- evaluation --------------------------------------------------------

    def evaluate(self, assignment: Mapping):
        """Exact value of the polynomial at a {0,1} assignment.

        Raises IncompleteAssignmentError if any variable of the polynomial is
        missing from ``assignment``.
        """
        total = 0
        for mono, coeff in self.terms.items():
            value = coeff
            for v in mono:
                try:
                    bit = assignment[v]
                except KeyError:
                    raise IncompleteAssignmentError(v) from None
                if not bit:
                    value = 0
                    break
            total += value
        return _canon(total) if isinstance(total, Fraction) else total

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        """JSON form: {"variables": [names], "terms": [{"vars": [...], "coeff": int}]}."""
        for c in self.terms.values():
            if not isinstance(c, int):
                raise ValueError("JSON polynomial format carries integer coefficients only")
        order = sorted(self.terms, key=lambda m: (len(m), m))
        return {
            "variables": [str(v) for v in self.variables()],
            "terms": [{"vars": [str(v) for v in m], "coeff": self.terms[m]} for m in order],
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "PseudoBooleanPolynomial":
        terms: dict = {}
        for entry in data["terms"]:
            key = _monomial(entry["vars"])
            terms[key] = terms.get(key, 0) + int(entry["coeff"])
        poly = cls(terms)
        declared = set(data.get("variables", ()))
        missing = declared - set(poly.variables())
        if missing:
            # keep declared-but-cancelled variables visible to solvers
            poly.registry.update({v: None for v in missing})
        return poly


# -- quadratization ---------------------------------------------------------


def quadratize(poly: PseudoBooleanPolynomial):
    """Reduce a HUBO to an equivalent QUBO over an enlarged variable set.

    Repeatedly selects the variable pair occurring in the largest number of
    monomials of degree >= 3 (ties broken by lexicographic order of the
    pair), introduces an ancilla a = x*y, rewrites those monomials, and adds
    the penalty M * (xy - 2xa - 2ya + 3a) with M = 1 + sum(|c|) over the
    rewritten terms.  The penalty weight guarantees, for arbitrary signed
    coefficients, that minima of the QUBO project exactly onto minima of the
    input polynomial.

    Returns (qubo, ancilla_map) where ancilla_map maps each replaced pair to
    its ancilla variable name.  A polynomial that is already quadratic is
    returned unchanged with an empty map.
    """
    if poly.is_quadratic():
        return poly, {}

    terms = dict(poly.terms)
    registry = dict(poly.registry)
    ancilla_map: dict[tuple, Var] = {}
    used_names = set(poly.variables())
    next_index = 1

    while True:
        counts: dict[tuple, int] = {}
        for mono in terms:
            if len(mono) >= 3:
                for pair in combinations(mono, 2):
                    counts[pair] = counts.get(pair, 0) + 1
        if not counts:
            break
        pair = min(counts, key=lambda p: (-counts[p], p))
        x, y = pair

        if pair in ancilla_map:
            anc = ancilla_map[pair]
        else:
            while f"a{next_index}" in used_names:
                next_index += 1
            anc = f"a{next_index}"
            used_names.add(anc)
            ancilla_map[pair] = anc
            registry[anc] = "ancilla"

        rewritten: dict = {}
        weight = 0
        for mono, coeff in terms.items():
            if len(mono) >= 3 and x in mono and y in mono:
                weight += abs(coeff)
                key = tuple(sorted((set(mono) - {x, y}) | {anc}))
            else:
                key = mono
            acc = rewritten.get(key, 0) + coeff
            if acc:
                rewritten[key] = _canon(acc)
            elif key in rewritten:
                del rewritten[key]
        penalty = 1 + weight
        for key, c in (
            ((x, y), penalty),
            (tuple(sorted((x, anc))), -2 * penalty),
            (tuple(sorted((y, anc))), -2 * penalty),
            ((anc,), 3 * penalty),
        ):
            acc = rewritten.get(key, 0) + c
            if acc:
                rewritten[key] = _canon(acc)
            elif key in rewritten:
                del rewritten[key]
        terms = rewritten

    return PseudoBooleanPolynomial._raw(terms, registry), ancilla_map


# -- Ising form -------------------------------------------------------------


class IsingProgram:
    """Spin program: energy(sigma) = sum h_i s_i + sum J_ij s_i s_j + offset.

    Spins take values in {-1, +1}.  Coefficients are exact Fractions;
    coupling keys are stored in canonical sorted order with no self
    couplings and no zero entries.
    """

    __slots__ = ("h", "j", "offset")

    def __init__(self, h: Mapping | None = None, j: Mapping | None = None, offset=0):
        self.h = {}
        for var, value in (h or {}).items():
            value = Fraction(value)
            if value:
                self.h[var] = value
        self.j = {}
        for pair, value in (j or {}).items():
            u, v = pair
            if u == v:
                raise ValueError(f"self coupling on {u!r}")
            value = Fraction(value)
            if value:
                key = (u, v) if u < v else (v, u)
                self.j[key] = self.j.get(key, Fraction(0)) + value
        self.j = {k: v for k, v in self.j.items() if v}
        self.offset = Fraction(offset)

    def variables(self) -> tuple:
        seen = set(self.h)
        for u, v in self.j:
            seen.add(u)
            seen.add(v)
        return tuple(sorted(seen))

    def max_abs_coefficient(self):
        vals = [abs(v) for v in self.h.values()] + [abs(v) for v in self.j.values()]
        return max(vals, default=Fraction(0))

    def energy(self, spins: Mapping):
        """Exact energy of a {-1,+1} spin state, offset included."""
        total = self.offset
        try:
            for var, value in self.h.items():
                s = spins[var]
                if s not in (-1, 1):
                    raise WrongVariableDomainError(f"spin {var!r} = {s!r} not in {{-1,+1}}")
                total += value * s
            for (u, v), value in self.j.items():
                su, sv = spins[u], spins[v]
                if su not in (-1, 1) or sv not in (-1, 1):
                    raise WrongVariableDomainError(f"spins ({u!r},{v!r}) not in {{-1,+1}}")
                total += value * su * sv
        except KeyError as exc:
            raise IncompleteAssignmentError(exc.args[0]) from None
        return total

    def __eq__(self, other) -> bool:
        if not isinstance(other, IsingProgram):
            return NotImplemented
        return self.h == other.h and self.j == other.j and self.offset == other.offset

    __hash__ = None

    def __repr__(self) -> str:
        return f"IsingProgram(|h|={len(self.h)}, |J|={len(self.j)}, offset={self.offset})"

    # text format: "offset v" / "h var v" / "J u v v" lines
    def to_text(self) -> str:
        lines = [f"offset {self.offset}"]
        for var in sorted(self.h):
            lines.append(f"h {var} {self.h[var]}")
        for u, v in sorted(self.j):
            lines.append(f"J {u} {v} {self.j[(u, v)]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "IsingProgram":
        h: dict = {}
        j: dict = {}
        offset = Fraction(0)
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if tokens[0] == "offset" and len(tokens) == 2:
                offset = Fraction(tokens[1])
            elif tokens[0] == "h" and len(tokens) == 3:
                h[_parse_var(tokens[1])] = h.get(_parse_var(tokens[1]), 0) + Fraction(tokens[2])
            elif tokens[0] == "J" and len(tokens) == 4:
                key = (_parse_var(tokens[1]), _parse_var(tokens[2]))
                j[key] = j.get(key, 0) + Fraction(tokens[3])
            else:
                raise ValueError(f"unrecognized Ising line: {raw!r}")
        return cls(h, j, offset)


def _parse_var(token: str):
    # hardware nodes are integers, logical names are strings
    return int(token) if token.lstrip("-").isdigit() else token


def to_ising(qubo: PseudoBooleanPolynomial) -> IsingProgram:
    """Exact QUBO -> Ising conversion via x = (sigma + 1) / 2.

    For every binary assignment x and spins sigma = 2x - 1 the energies
    agree exactly, offset included.  Raises NotQuadraticError above degree 2.
    """
    if not qubo.is_quadratic():
        raise NotQuadraticError(f"degree {qubo.degree()} polynomial is not a QUBO")
    h: dict = {}
    j: dict = {}
    offset = Fraction(0)
    for mono, coeff in qubo.terms.items():
        c = Fraction(coeff)
        if len(mono) == 0:
            offset += c
        elif len(mono) == 1:
            offset += c / 2
            h[mono[0]] = h.get(mono[0], Fraction(0)) + c / 2
        else:
            u, v = mono
            offset += c / 4
            h[u] = h.get(u, Fraction(0)) + c / 4
            h[v] = h.get(v, Fraction(0)) + c / 4
            j[(u, v)] = j.get((u, v), Fraction(0)) + c / 4
    return IsingProgram(h, j, offset)


def from_ising(ising: IsingProgram) -> PseudoBooleanPolynomial:
    """Inverse of to_ising: substitute sigma = 2x - 1 exactly."""
    poly = PseudoBooleanPolynomial.constant(ising.offset)
    for var, value in ising.h.items():
        poly = poly + PseudoBooleanPolynomial({(var,): 2 * value, (): -value})
    for (u, v), value in ising.j.items():
        poly = poly + PseudoBooleanPolynomial(
            {(u, v): 4 * value, (u,): -2 * value, (v,): -2 * value, (): value}
        )
    return poly
