"""Finite probability spaces with exact rational masses.

Sigma-algebras are partitions of the atom set (on a finite space every
sigma-algebra is generated by one), and all mass arithmetic uses
``fractions.Fraction`` so that independence checks are exact identities
rather than toleranced comparisons.

Atomless spaces enter through :class:`DyadicModel`: the interval piece
(gamma, 1] is modeled by 2**level uniform cells, each optionally refined
into equal-mass sub-atoms, plus a single atom of mass gamma for the purely
atomic remainder.  The embedding of atoms onto dyadic subintervals is the
canonical order-preserving one, and the evaluation point of an atom is its
subinterval midpoint (atoms of the atomic part sit at gamma/2).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    DivisibilityError,
    PreconditionError,
    StructureError,
)
from .walsh import walsh_set


def _as_fraction(x) -> Fraction:
    if isinstance(x, float):
        raise StructureError(
            f"masses must be exact rationals, got float {x!r}; pass Fraction or 'p/q'"
        )
    return Fraction(x)


@dataclass(frozen=True)
class DiscreteSpace:
    """Finite atomic probability space: ordered atoms with rational masses.

    Freshly built spaces carry contiguous ids 0..n-1; spaces produced by
    :func:`restrict` keep their parent ids so that traces and independence
    statements read in the original labels.
    """

    ids: tuple[int, ...]
    masses: tuple[Fraction, ...]
    label: str | None = None

    def __post_init__(self):
        if len(self.ids) != len(self.masses) or not self.ids:
            raise StructureError("space needs matching, non-empty ids and masses")
        if len(set(self.ids)) != len(self.ids) or list(self.ids) != sorted(self.ids):
            raise StructureError("atom ids must be unique and ascending")
        for m in self.masses:
            if m <= 0:
                raise StructureError(f"atom mass {m} is not strictly positive")
        if sum(self.masses, Fraction(0)) != 1:
            raise StructureError("atom masses must sum exactly to 1")

    @classmethod
    def uniform(cls, n: int, label: str | None = None) -> "DiscreteSpace":
        if n < 1:
            raise StructureError("need at least one atom")
        return cls(tuple(range(n)), tuple([Fraction(1, n)] * n), label)

    @classmethod
    def from_masses(cls, masses, label: str | None = None) -> "DiscreteSpace":
        ms = tuple(_as_fraction(m) for m in masses)
        return cls(tuple(range(len(ms))), ms, label)

    def mass_of(self, atom: int) -> Fraction:
        try:
            return self.masses[self.ids.index(atom)]
        except ValueError:
            raise StructureError(f"atom {atom} not in space") from None

    def mass(self, atoms) -> Fraction:
        lookup = dict(zip(self.ids, self.masses))
        total = Fraction(0)
        for a in set(atoms):
            if a not in lookup:
                raise StructureError(f"atom {a} not in space")
            total += lookup[a]
        return total

    @property
    def atom_set(self) -> frozenset[int]:
        return frozenset(self.ids)

    def to_json(self) -> dict:
        return {
            "atoms": [
                {"id": i, "mass": f"{m.numerator}/{m.denominator}"}
                for i, m in zip(self.ids, self.masses)
            ],
            **({"label": self.label} if self.label else {}),
        }

    @classmethod
    def from_json(cls, data: dict) -> "DiscreteSpace":
        atoms = data["atoms"]
        return cls(
            tuple(a["id"] for a in atoms),
            tuple(Fraction(a["mass"]) for a in atoms),
            data.get("label"),
        )


def _canonical_blocks(blocks) -> tuple[frozenset[int], ...]:
    bs = [frozenset(b) for b in blocks]
    if any(not b for b in bs):
        raise StructureError("partition blocks must be non-empty")
    return tuple(sorted(bs, key=min))


@dataclass(frozen=True, init=False)
class SigmaPartition:
    """A sigma-algebra on a finite space, as the partition generating it.

    Blocks are stored in canonical order (sorted by smallest member).
    """

    blocks: tuple[frozenset[int], ...]

    def __init__(self, blocks):
        object.__setattr__(self, "blocks", _canonical_blocks(blocks))
        seen: set[int] = set()
        for b in self.blocks:
            if seen & b:
                raise StructureError("partition blocks overlap")
            seen |= b

    @classmethod
    def trivial(cls, space: DiscreteSpace) -> "SigmaPartition":
        return cls([space.atom_set])

    @classmethod
    def singletons(cls, space: DiscreteSpace) -> "SigmaPartition":
        return cls([{a} for a in space.ids])

    @property
    def atom_set(self) -> frozenset[int]:
        return frozenset().union(*self.blocks)

    def block_of(self, atom: int) -> frozenset[int]:
        for b in self.blocks:
            if atom in b:
                return b
        raise StructureError(f"atom {atom} not covered by partition")

    def block_index_of(self, atom: int) -> int:
        for i, b in enumerate(self.blocks):
            if atom in b:
                return i
        raise StructureError(f"atom {atom} not covered by partition")

    def to_json(self) -> list[list[int]]:
        return [sorted(b) for b in self.blocks]

    @classmethod
    def from_json(cls, data) -> "SigmaPartition":
        return cls([set(b) for b in data])


def _check_universe(space: DiscreteSpace, *parts: SigmaPartition) -> None:
    for p in parts:
        if p.atom_set != space.atom_set:
            raise StructureError(
                "partition atom universe does not match the space"
            )


@dataclass(frozen=True)
class SupplementPartition:
    """Equal-mass partition whose parts are each independent of a base algebra."""

    parts: tuple[frozenset[int], ...]
    n: int

    def __post_init__(self):
        if self.n < 2 or len(self.parts) != self.n:
            raise StructureError("supplement needs n >= 2 parts")


def is_refinement(fine: SigmaPartition, coarse: SigmaPartition) -> bool:
    """True iff every fine block is contained in some coarse block."""
    if fine.atom_set != coarse.atom_set:
        raise StructureError("partitions live on different atom universes")
    return all(any(fb <= cb for cb in coarse.blocks) for fb in fine.blocks)


def is_nowhere_equivalent(t_alg: SigmaPartition, f_alg: SigmaPartition) -> bool:
    """True iff the fine algebra strictly refines the coarse one on every block.

    Discrete criterion: every coarse block (all carry positive mass) splits
    into at least two fine blocks.
    """
    if not is_refinement(t_alg, f_alg):
        raise PreconditionError("t_alg must refine f_alg")
    fine_count = {id(b): 0 for b in f_alg.blocks}
    for fb in t_alg.blocks:
        for cb in f_alg.blocks:
            if fb <= cb:
                fine_count[id(cb)] += 1
                break
    return all(c >= 2 for c in fine_count.values())


def independence_product_check(
    space: DiscreteSpace, s, d, total_mass=Fraction(1)
) -> bool:
    """Exact independence of two events inside a universe of given mass."""
    s = set(s)
    d = set(d)
    total = _as_fraction(total_mass)
    return space.mass(s & d) * total == space.mass(s) * space.mass(d)


def _equal_mass_groups(space, atoms: list[int], n: int, quota: Fraction,
                       block_desc: str) -> list[list[int]]:
    """Deterministically group atoms into n consecutive-fill groups of equal mass."""
    groups: list[list[int]] = [[] for _ in range(n)]
    acc = Fraction(0)
    g = 0
    for a in atoms:
        if g >= n:
            raise DivisibilityError(
                f"block {block_desc} cannot be split into {n} equal-mass parts"
            )
        groups[g].append(a)
        acc += space.mass_of(a)
        if acc == quota:
            acc = Fraction(0)
            g += 1
        elif acc > quota:
            raise DivisibilityError(
                f"block {block_desc} cannot be split into {n} equal-mass parts "
                f"(atom masses do not tile the quota {quota})"
            )
    if g != n:
        raise DivisibilityError(
            f"block {block_desc} cannot be split into {n} equal-mass parts"
        )
    return groups


def build_independent_supplement(
    space: DiscreteSpace, f_alg: SigmaPartition, n: int
) -> SupplementPartition:
    """Partition the space into n parts of mass 1/n, each independent of f_alg.

    Within every base block the atoms are assigned round-robin in canonical
    order when they have equal masses (the dyadic case), and by consecutive
    exact filling otherwise; either way part j receives exactly 1/n of every
    block's mass.
    """
    if n < 2:
        raise PreconditionError("supplement needs n >= 2")
    _check_universe(space, f_alg)
    parts: list[set[int]] = [set() for _ in range(n)]
    for b in f_alg.blocks:
        atoms = sorted(b)
        masses = {space.mass_of(a) for a in atoms}
        if len(masses) == 1:
            if len(atoms) % n:
                raise DivisibilityError(
                    f"block {sorted(b)} has {len(atoms)} atoms, not divisible by {n}"
                )
            for pos, a in enumerate(atoms):
                parts[pos % n].add(a)
        else:
            quota = space.mass(b) / n
            for j, grp in enumerate(
                _equal_mass_groups(space, atoms, n, quota, str(sorted(b)))
            ):
                parts[j].update(grp)
    return SupplementPartition(tuple(frozenset(p) for p in parts), n)


def restrict(
    space: DiscreteSpace, alg: SigmaPartition, d
) -> tuple[DiscreteSpace, SigmaPartition]:
    """Restricted space on d with rescaled masses, and the traced partition.

    Atom ids are preserved (not relabeled), so repeated restriction composes
    literally: restricting to d1 then d2 equals restricting to d1 & d2.
    """
    _check_universe(space, alg)
    d = set(d)
    if not d <= space.atom_set:
        raise StructureError("restriction set contains atoms outside the space")
    total = space.mass(d)
    if total == 0 or not d:
        raise PreconditionError("cannot restrict to a set of zero mass")
    ids = tuple(sorted(d))
    masses = tuple(space.mass_of(a) / total for a in ids)
    traced = [b & d for b in alg.blocks if b & d]
    return DiscreteSpace(ids, masses, space.label), SigmaPartition(traced)


@dataclass(frozen=True)
class DyadicModel:
    """Desk model of the split interval space.

    The interval piece (gamma, 1] becomes 2**level cells of equal mass,
    each split into ``refinement`` equal atoms; a positive gamma adds one
    leading atom of mass gamma for the atomic part.  ``cell_partition``
    (cells as blocks, plus the atomic atom as its own block) plays the role
    of the characteristic algebra generated by level-``level`` step
    functions.
    """

    gamma: Fraction
    level: int
    refinement: int = 1
    space: DiscreteSpace = field(init=False, compare=False)

    def __post_init__(self):
        gamma = _as_fraction(self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if not 0 <= gamma < 1:
            raise PreconditionError(f"gamma must lie in [0,1), got {gamma}")
        if self.level < 0 or self.refinement < 1:
            raise PreconditionError("level must be >= 0 and refinement >= 1")
        ncells = 1 << self.level
        masses: list[Fraction] = []
        if gamma > 0:
            masses.append(gamma)
        atom_mass = (1 - gamma) / (ncells * self.refinement)
        masses.extend([atom_mass] * (ncells * self.refinement))
        object.__setattr__(
            self,
            "space",
            DiscreteSpace(tuple(range(len(masses))), tuple(masses)),
        )

    @property
    def ncells(self) -> int:
        return 1 << self.level

    @property
    def atomic_atom(self) -> int | None:
        return 0 if self.gamma > 0 else None

    @property
    def interval_atoms(self) -> tuple[int, ...]:
        start = 1 if self.gamma > 0 else 0
        return tuple(range(start, start + self.ncells * self.refinement))

    def cell_of(self, atom: int) -> int | None:
        """Cell index of an interval atom; None for the atomic part."""
        if self.gamma > 0 and atom == 0:
            return None
        start = 1 if self.gamma > 0 else 0
        idx = atom - start
        if not 0 <= idx < self.ncells * self.refinement:
            raise StructureError(f"atom {atom} not in model")
        return idx // self.refinement

    def cell_atoms(self, cell: int) -> tuple[int, ...]:
        start = (1 if self.gamma > 0 else 0) + cell * self.refinement
        return tuple(range(start, start + self.refinement))

    @property
    def cell_partition(self) -> SigmaPartition:
        blocks = [set(self.cell_atoms(c)) for c in range(self.ncells)]
        if self.gamma > 0:
            blocks.append({0})
        return SigmaPartition(blocks)

    @property
    def atom_partition(self) -> SigmaPartition:
        return SigmaPartition.singletons(self.space)

    def phi(self, atom: int) -> Fraction:
        """Evaluation point of an atom: its subinterval midpoint in (gamma, 1]."""
        if self.gamma > 0 and atom == 0:
            return self.gamma / 2
        start = 1 if self.gamma > 0 else 0
        idx = atom - start
        n_sub = self.ncells * self.refinement
        if not 0 <= idx < n_sub:
            raise StructureError(f"atom {atom} not in model")
        return self.gamma + (1 - self.gamma) * Fraction(2 * idx + 1, 2 * n_sub)

    def rescaled(self, atom: int) -> Fraction:
        """(phi(atom) - gamma)/(1 - gamma): the [0,1] argument of the Walsh maps."""
        return (self.phi(atom) - self.gamma) / (1 - self.gamma)

    def walsh_block(self, n: int) -> frozenset[int]:
        """Interval atoms where W_n of the rescaled coordinate is +1."""
        cells = walsh_set(n, self.level)
        out: set[int] = set()
        for c in cells:
            out.update(self.cell_atoms(c))
        return frozenset(out)


def space_to_json_str(space: DiscreteSpace, alg: SigmaPartition | None = None) -> str:
    doc = space.to_json()
    if alg is not None:
        doc["blocks"] = alg.to_json()
    return json.dumps(doc, sort_keys=True)
