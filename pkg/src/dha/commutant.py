"""The commutant calculus: bases of equivariant linear maps.

By Schur's lemma, a linear map commuting with every group matrix is
block-diagonal per isotypic component; inside a component it acts on copy
indices, with scalars for absolutely irreducible irreps and the
two-generator algebra spanned by I and the quarter-turn J for
rotation-type ones.  This module builds explicit Frobenius-orthonormal
bases of those maps, the group-averaging projection onto them, and the
free-coordinate parameterization used by the equivariant model fits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import fingerprint, frozen_array
from .groups import Representation
from .isotypic import IsotypicBasis, isotypic_basis

__all__ = [
    "CommutantBasis",
    "EquivariantLinearMap",
    "commutant_basis",
    "hom_basis",
    "assemble",
    "coordinates",
    "equivariant_project",
    "equivariance_residual",
    "hom_space_dimension",
    "save_equivariant_map",
    "load_equivariant_map",
]

#: The quarter-turn generator of the rotation-type endomorphism algebra.
_J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class CommutantBasis:
    """Frobenius-orthonormal basis of the commutant of a block-diagonal rep.

    Attributes
    ----------
    rep : Representation
        The representation, expressed in an isotypic basis.
    blocks : tuple of IsotypicBlock
        Block layout of ``rep``.
    basis_matrices : ``(n, dim, dim)`` ndarray
        Orthonormal generators under the Frobenius inner product; each one
        commutes with every group matrix and is block-diagonal.
    block_slices : tuple of slice
        Coordinate range of each isotypic block's generators.
    """

    rep: Representation
    blocks: tuple
    basis_matrices: np.ndarray
    block_slices: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis_matrices", frozen_array(self.basis_matrices))

    def __len__(self):
        return self.basis_matrices.shape[0]

    @property
    def dim_space(self) -> int:
        return self.rep.dim

    def layout_fingerprint(self) -> str:
        layout = [
            [blk.label, blk.irrep.dim, blk.multiplicity, blk.irrep.endomorphism_dim]
            for blk in self.blocks
        ]
        return fingerprint(
            {"group": self.rep.group.descriptor, "dim": self.rep.dim, "blocks": layout}
        )


@dataclass(frozen=True)
class EquivariantLinearMap:
    """An equivariant map as free coordinates over a commutant basis."""

    basis: CommutantBasis
    theta: np.ndarray

    def __post_init__(self):
        theta = frozen_array(self.theta)
        if theta.shape != (len(self.basis),):
            raise ValueError(
                f"theta has length {theta.shape}, commutant dimension is {len(self.basis)}"
            )
        object.__setattr__(self, "theta", theta)

    def matrix(self) -> np.ndarray:
        return assemble(self)


def _block_generators(d: int, m: int, complex_type: bool):
    """Generators ``E_jk (x) I`` (and ``E_jk (x) J``) scaled to unit norm."""
    eye = np.eye(d) / np.sqrt(d)
    gens = []
    for j in range(m):
        for k in range(m):
            g = np.zeros((m * d, m * d))
            g[j * d:(j + 1) * d, k * d:(k + 1) * d] = eye
            gens.append(g)
            if complex_type:
                gj = np.zeros((m * d, m * d))
                gj[j * d:(j + 1) * d, k * d:(k + 1) * d] = _J / np.sqrt(d)
                gens.append(gj)
    return gens


def commutant_basis(rep_iso: Representation, blocks) -> CommutantBasis:
    """Basis of all maps commuting with a block-aligned representation.

    ``rep_iso`` must be exactly block-diagonal in irrep copies per
    ``blocks`` (residual above 1e-8 raises).  The basis size is
    ``sum_i m_i^2 e_i`` with ``e_i`` the irrep endomorphism dimension.
    """
    blocks = tuple(blocks)
    expected = np.zeros((rep_iso.group.order, rep_iso.dim, rep_iso.dim))
    for blk in blocks:
        d = blk.irrep.dim
        for j in range(blk.multiplicity):
            o = blk.offset + j * d
            expected[:, o:o + d, o:o + d] = blk.irrep.matrices
    resid = float(np.max(np.linalg.norm(rep_iso.matrices - expected, axis=(1, 2))))
    if resid > 1e-8:
        raise ValueError(
            f"representation is not block-aligned with the given layout (residual {resid:.3e})"
        )
    mats = []
    slices = []
    start = 0
    for blk in blocks:
        gens = _block_generators(blk.irrep.dim, blk.multiplicity, blk.irrep.field_type == "complex")
        for g in gens:
            full = np.zeros((rep_iso.dim, rep_iso.dim))
            full[blk.slice, blk.slice] = g
            mats.append(full)
        slices.append(slice(start, start + len(gens)))
        start += len(gens)
    return CommutantBasis(rep_iso, blocks, np.array(mats), tuple(slices))


def hom_basis(basis_in: IsotypicBasis, basis_out: IsotypicBasis) -> np.ndarray:
    """Orthonormal basis of equivariant maps between two decomposed spaces.

    Returns ``(n, dim_out, dim_in)`` matrices expressed in the ORIGINAL
    bases of both spaces (the isotypic changes of basis are folded in).
    Generators pair copies of matching irreps; inequivalent irreps
    contribute nothing.
    """
    if basis_in.group != basis_out.group:
        raise ValueError("spaces carry different groups")
    blocks_out = {blk.label: blk for blk in basis_out.blocks}
    gens = []
    for blk_in in basis_in.blocks:
        blk_out = blocks_out.get(blk_in.label)
        if blk_out is None:
            continue
        d = blk_in.irrep.dim
        stamps = [np.eye(d) / np.sqrt(d)]
        if blk_in.irrep.field_type == "complex":
            stamps.append(_J / np.sqrt(d))
        for j in range(blk_out.multiplicity):
            for k in range(blk_in.multiplicity):
                for stamp in stamps:
                    g = np.zeros((basis_out.dim, basis_in.dim))
                    g[
                        blk_out.offset + j * d:blk_out.offset + (j + 1) * d,
                        blk_in.offset + k * d:blk_in.offset + (k + 1) * d,
                    ] = stamp
                    gens.append(g)
    if not gens:
        return np.zeros((0, basis_out.dim, basis_in.dim))
    gens = np.array(gens)
    return np.einsum("ji,njk,kl->nil", basis_out.q, gens, basis_in.q)


def assemble(emap: EquivariantLinearMap) -> np.ndarray:
    """Dense matrix ``sum_l theta_l B_l`` of an equivariant map."""
    return np.einsum("l,lij->ij", emap.theta, emap.basis.basis_matrices)


def coordinates(a: np.ndarray, basis: CommutantBasis) -> np.ndarray:
    """Frobenius coordinates ``<A, B_l>`` of a matrix over a commutant basis."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (basis.dim_space, basis.dim_space):
        raise ValueError(f"matrix shape {a.shape} does not match space dim {basis.dim_space}")
    return np.einsum("lij,ij->l", basis.basis_matrices, a)


def equivariant_project(a: np.ndarray, rep: Representation) -> np.ndarray:
    """Group-averaging projection ``(1/|G|) sum_g rho(g) A rho(g)^{-1}``.

    The Frobenius-orthogonal projection of ``a`` onto the commutant of
    ``rep``; idempotent and norm non-increasing.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (rep.dim, rep.dim):
        raise ValueError(f"matrix shape {a.shape} does not match representation dim {rep.dim}")
    return np.einsum("gij,jk,glk->il", rep.matrices, a, rep.matrices) / rep.group.order


def equivariance_residual(a: np.ndarray, rep: Representation) -> float:
    """``max_g || rho(g) A - A rho(g) ||_F``; zero exactly on the commutant."""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (rep.dim, rep.dim):
        raise ValueError(f"matrix shape {a.shape} does not match representation dim {rep.dim}")
    comm = np.einsum("gij,jk->gik", rep.matrices, a) - np.einsum("ij,gjk->gik", a, rep.matrices)
    return float(np.max(np.linalg.norm(comm, axis=(1, 2))))


def hom_space_dimension(rep_a: Representation, rep_b: Representation) -> int:
    """Dimension of ``{T : rho_b(g) T = T rho_a(g) for all g}``.

    Computed directly from the null space of the vectorized commutation
    system; equals ``sum_i m_i(a) m_i(b) e_i`` over matching irreps.
    """
    if rep_a.group != rep_b.group:
        raise ValueError("representations belong to different groups")
    da, db = rep_a.dim, rep_b.dim
    rows = []
    for g in rep_a.group.elements():
        rows.append(np.kron(rep_b.matrices[g], np.eye(da)) - np.kron(np.eye(db), rep_a.matrices[g].T))
    system = np.concatenate(rows, axis=0)
    svals = np.linalg.svd(system, compute_uv=False)
    tol = 1e-8 * max(1.0, svals[0] if svals.size else 0.0)
    return int(np.sum(svals <= tol)) + max(0, da * db - svals.size)


def commutant_basis_of(rep: Representation, table=None):
    """Convenience: isotypic basis plus commutant basis of an arbitrary rep."""
    iso = isotypic_basis(rep, table)
    return iso, commutant_basis(iso.rotated_rep(), iso.blocks)


def save_equivariant_map(emap: EquivariantLinearMap, path):
    doc = {
        "basis_fingerprint": emap.basis.layout_fingerprint(),
        "theta": [float(v) for v in emap.theta],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_equivariant_map(path, basis: CommutantBasis) -> EquivariantLinearMap:
    """Load coordinates, verifying the stored fingerprint against ``basis``."""
    doc = json.loads(Path(path).read_text())
    have = basis.layout_fingerprint()
    if doc["basis_fingerprint"] != have:
        raise ValueError(
            "stored map was built over a different block layout "
            f"({doc['basis_fingerprint'][:12]}... != {have[:12]}...)"
        )
    return EquivariantLinearMap(basis, np.array(doc["theta"], dtype=np.float64))
