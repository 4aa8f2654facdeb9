"""Chemical structures: atoms, bonds, and parsed molecules.

Hydrogen is never a node; it is tracked per heavy atom, either explicitly
(bracket atoms) or implicitly from standard valences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

ALLOWED_ELEMENTS = ("C", "N", "O", "Cl", "S", "F", "Br", "I", "P")

# Smallest-first standard valences used for implicit hydrogen filling.
STANDARD_VALENCES = {
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
    "S": (2, 4, 6),
    "P": (3, 5),
}

ATOMIC_WEIGHTS = {
    "H": 1.008,
    "C": 12.011,
    "N": 14.007,
    "O": 15.999,
    "F": 18.998,
    "P": 30.974,
    "S": 32.06,
    "Cl": 35.45,
    "Br": 79.904,
    "I": 126.904,
}

SINGLE = "single"
DOUBLE = "double"
TRIPLE = "triple"
AROMATIC = "aromatic"
BOND_ORDERS = (SINGLE, DOUBLE, TRIPLE, AROMATIC)

STEREO_NONE = "none"
STEREO_Z = "Z"
STEREO_E = "E"


@dataclass(frozen=True)
class Atom:
    element: str
    aromatic: bool = False
    explicit_h: int | None = None  # None = fill from valence rules
    formal_charge: int = 0
    isotope: bool = False


@dataclass(frozen=True)
class Bond:
    a: int
    b: int
    order: str = SINGLE
    stereo: str = STEREO_NONE

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


@dataclass(frozen=True)
class Molecule:
    """Immutable heavy-atom graph with bond orders and double-bond stereo."""

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...]
    tetra_centers: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        n = len(self.atoms)
        seen: set[tuple[int, int]] = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n):
                raise ValueError(f"bond endpoint out of range: {bond}")
            if bond.a == bond.b:
                raise ValueError(f"bond endpoints must be distinct: {bond}")
            key = (min(bond.a, bond.b), max(bond.a, bond.b))
            if key in seen:
                raise ValueError(f"duplicate bond between atoms {key}")
            seen.add(key)
            if bond.order == AROMATIC and not (
                self.atoms[bond.a].aromatic and self.atoms[bond.b].aromatic
            ):
                raise ValueError(
                    f"aromatic bond {key} between non-aromatic atoms"
                )

    def neighbors(self, idx: int) -> list[int]:
        out = []
        for bond in self.bonds:
            if bond.a == idx:
                out.append(bond.b)
            elif bond.b == idx:
                out.append(bond.a)
        return out

    def bonds_of(self, idx: int) -> list[Bond]:
        return [b for b in self.bonds if idx in (b.a, b.b)]

    def degree(self, idx: int) -> int:
        return len(self.neighbors(idx))


def permute_molecule(mol: Molecule, perm: list[int] | tuple[int, ...]) -> Molecule:
    """Relabel atoms so old index i becomes perm[i]; useful for invariance checks."""
    n = len(mol.atoms)
    if sorted(perm) != list(range(n)):
        raise ValueError("perm must be a permutation of atom indices")
    atoms: list[Atom | None] = [None] * n
    for i, atom in enumerate(mol.atoms):
        atoms[perm[i]] = atom
    bonds = tuple(
        replace(b, a=perm[b.a], b=perm[b.b]) for b in mol.bonds
    )
    tetra = tuple((perm[i], parity) for i, parity in mol.tetra_centers)
    return Molecule(tuple(atoms), bonds, tetra)


def molecular_weight(mol: Molecule, h_counts: list[int]) -> float:
    """Mass in g/mol from heavy atoms plus the given hydrogen counts."""
    total = sum(ATOMIC_WEIGHTS[a.element] for a in mol.atoms)
    total += ATOMIC_WEIGHTS["H"] * sum(h_counts)
    return total
