"""Molecular graphs for the network: 24 node features, 9 edge features.

Node row layout (one-hot blocks):
  [0..8]   element (C, N, O, Cl, S, F, Br, I, P)
  [9..13]  heavy-atom degree (0, 1, 2, 3, >=4)
  [14..17] hydrogen count (0, 1, 2, >=3)
  [18..21] hybridization (SP, SP2, SP3, OTHER)
  [22]     aromatic
  [23]     in ring

Edge vector layout:
  [0..3]   bond order (single, double, triple, aromatic)
  [4]      conjugated (both endpoints SP or SP2)
  [5]      in ring
  [6..8]   double-bond stereo (none, Z, E)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .molecule import (
    ALLOWED_ELEMENTS,
    AROMATIC,
    DOUBLE,
    SINGLE,
    STANDARD_VALENCES,
    STEREO_E,
    STEREO_Z,
    TRIPLE,
    Molecule,
    molecular_weight,
)
from .smiles import bond_order_sum, implicit_hydrogens

NODE_FEATURES = 24
EDGE_FEATURES = 9

SP, SP2, SP3, OTHER = "SP", "SP2", "SP3", "OTHER"

_ELEMENT_SLOT = {el: i for i, el in enumerate(ALLOWED_ELEMENTS)}
_ORDER_SLOT = {SINGLE: 0, DOUBLE: 1, TRIPLE: 2, AROMATIC: 3}
_STEREO_SLOT = {"none": 0, STEREO_Z: 1, STEREO_E: 2}


class ScopeError(ValueError):
    """Raised when featurizing a molecule outside the model's domain."""

    def __init__(self, reasons):
        self.reasons = tuple(reasons)
        super().__init__("molecule out of scope: " + ", ".join(self.reasons))


@dataclass(frozen=True)
class ScopeResult:
    accepted: bool
    reasons: tuple[str, ...] = ()


@dataclass(frozen=True)
class MolGraph:
    """Featurized graph; every chemical bond yields two directed edge rows."""

    node_features: np.ndarray  # (N, 24)
    edges: np.ndarray  # (E, 2) int, row (i, j) and its reverse both present
    edge_features: np.ndarray  # (E, 9)
    h_donors: int
    h_acceptors: int
    heavy_atom_count: int
    mol_weight: float

    def __post_init__(self):
        for arr in (self.node_features, self.edges, self.edge_features):
            arr.setflags(write=False)


def ring_membership(mol: Molecule) -> tuple[list[bool], list[bool]]:
    """Per-atom and per-bond cycle flags via bridge detection.

    A bond lies on a cycle iff it is not a bridge; an atom lies on a cycle
    iff one of its bonds does.
    """
    n = len(mol.atoms)
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for bi, bond in enumerate(mol.bonds):
        adj[bond.a].append((bond.b, bi))
        adj[bond.b].append((bond.a, bi))

    visited = [False] * n
    disc = [0] * n
    low = [0] * n
    bridge = [False] * len(mol.bonds)
    timer = 0

    for root in range(n):
        if visited[root]:
            continue
        stack = [(root, -1, iter(adj[root]))]
        visited[root] = True
        disc[root] = low[root] = timer = timer + 1
        while stack:
            node, via, it = stack[-1]
            advanced = False
            for nxt, bi in it:
                if bi == via:
                    continue
                if not visited[nxt]:
                    visited[nxt] = True
                    timer += 1
                    disc[nxt] = low[nxt] = timer
                    stack.append((nxt, bi, iter(adj[nxt])))
                    advanced = True
                    break
                low[node] = min(low[node], disc[nxt])
            if advanced:
                continue
            stack.pop()
            if via >= 0:
                parent = stack[-1][0]
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridge[via] = True

    bond_flags = [not b for b in bridge]
    atom_flags = [False] * n
    for bi, bond in enumerate(mol.bonds):
        if bond_flags[bi]:
            atom_flags[bond.a] = True
            atom_flags[bond.b] = True
    return atom_flags, bond_flags


def hybridizations(mol: Molecule) -> list[str]:
    """Deterministic hybridization labels from bond patterns alone:
    SP for a triple bond or two doubles, SP2 for aromatic or one double,
    SP3 for saturated C/N/O/S/P within their smallest valence, else OTHER."""
    h_counts = implicit_hydrogens(mol)
    labels = []
    for idx, atom in enumerate(mol.atoms):
        n_triple = n_double = 0
        for bond in mol.bonds_of(idx):
            if bond.order == TRIPLE:
                n_triple += 1
            elif bond.order == DOUBLE:
                n_double += 1
        if n_triple >= 1 or n_double >= 2:
            labels.append(SP)
        elif atom.aromatic or n_double >= 1:
            labels.append(SP2)
        elif atom.element in ("C", "N", "O", "S", "P") and (
            bond_order_sum(mol, idx) + h_counts[idx]
            <= STANDARD_VALENCES[atom.element][0]
        ):
            labels.append(SP3)
        else:
            labels.append(OTHER)
    return labels


def validate_scope(mol: Molecule) -> ScopeResult:
    """Model applicability check; rejection is a value, never an exception."""
    reasons = []
    if not any(a.element == "C" for a in mol.atoms):
        reasons.append("no carbon atom")
    for idx, atom in enumerate(mol.atoms):
        if atom.element not in ALLOWED_ELEMENTS:
            reasons.append(f"element {atom.element} not supported (atom {idx})")
        if atom.formal_charge != 0:
            reasons.append(f"formal charge on atom {idx}")
        if atom.isotope:
            reasons.append(f"isotope label on atom {idx}")
        if _is_radical(mol, idx):
            reasons.append(f"unpaired electrons on atom {idx}")
    return ScopeResult(not reasons, tuple(reasons))


def _is_radical(mol: Molecule, idx: int) -> bool:
    # Bracket atoms pin their hydrogen count; a total valence below every
    # standard value leaves unpaired electrons.
    atom = mol.atoms[idx]
    if atom.explicit_h is None or atom.formal_charge != 0:
        return False
    if atom.element not in STANDARD_VALENCES:
        return False
    total = int(np.ceil(bond_order_sum(mol, idx))) + atom.explicit_h
    valences = STANDARD_VALENCES[atom.element]
    return total < max(valences) and total not in valences


def featurize(mol: Molecule) -> MolGraph:
    """Build the initial graph the network consumes.

    Raises :class:`ScopeError` for out-of-scope molecules.
    """
    scope = validate_scope(mol)
    if not scope.accepted:
        raise ScopeError(scope.reasons)

    n = len(mol.atoms)
    h_counts = implicit_hydrogens(mol)
    atom_ring, bond_ring = ring_membership(mol)
    hybrid = hybridizations(mol)

    x = np.zeros((n, NODE_FEATURES), dtype=np.float64)
    for idx, atom in enumerate(mol.atoms):
        x[idx, _ELEMENT_SLOT[atom.element]] = 1.0
        degree = mol.degree(idx)
        x[idx, 9 + min(degree, 4)] = 1.0
        x[idx, 14 + min(h_counts[idx], 3)] = 1.0
        x[idx, 18 + (SP, SP2, SP3, OTHER).index(hybrid[idx])] = 1.0
        if atom.aromatic:
            x[idx, 22] = 1.0
        if atom_ring[idx]:
            x[idx, 23] = 1.0

    edges = np.zeros((2 * len(mol.bonds), 2), dtype=np.int64)
    efeat = np.zeros((2 * len(mol.bonds), EDGE_FEATURES), dtype=np.float64)
    pi_like = {SP, SP2}
    for bi, bond in enumerate(mol.bonds):
        vec = np.zeros(EDGE_FEATURES)
        vec[_ORDER_SLOT[bond.order]] = 1.0
        if hybrid[bond.a] in pi_like and hybrid[bond.b] in pi_like:
            vec[4] = 1.0
        if bond_ring[bi]:
            vec[5] = 1.0
        vec[6 + _STEREO_SLOT[bond.stereo]] = 1.0
        edges[2 * bi] = (bond.a, bond.b)
        edges[2 * bi + 1] = (bond.b, bond.a)
        efeat[2 * bi] = vec
        efeat[2 * bi + 1] = vec

    donors = acceptors = 0
    for idx, atom in enumerate(mol.atoms):
        if atom.element in ("N", "O"):
            acceptors += 1
            if h_counts[idx] >= 1:
                donors += 1

    return MolGraph(
        node_features=x,
        edges=edges,
        edge_features=efeat,
        h_donors=donors,
        h_acceptors=acceptors,
        heavy_atom_count=n,
        mol_weight=molecular_weight(mol, h_counts),
    )
