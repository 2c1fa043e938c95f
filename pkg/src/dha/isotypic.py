"""Isotypic decomposition of real orthogonal representations.

Any representation of a supported group splits into orthogonal isotypic
components, one per irrep, each holding all copies of that irrep.  This
module computes the orthogonal change of basis that makes every group
matrix exactly block-diagonal with explicit irrep blocks, plus the
projectors and per-block component extraction built on top of it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import fingerprint, frozen_array
from .groups import Irrep, IrrepTable, Representation, irreps_real

__all__ = [
    "DecompositionError",
    "IsotypicBlock",
    "IsotypicBasis",
    "character_projector",
    "isotypic_basis",
    "isotypic_project",
    "is_g_stable",
    "save_isotypic_basis",
    "load_isotypic_basis",
]


class DecompositionError(ValueError):
    """Raised when an isotypic alignment cannot be computed; carries the residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class IsotypicBlock:
    """One isotypic component: ``multiplicity`` copies of ``irrep``."""

    irrep: Irrep
    multiplicity: int
    offset: int

    @property
    def size(self) -> int:
        return self.irrep.dim * self.multiplicity

    @property
    def label(self) -> str:
        return self.irrep.label

    @property
    def slice(self) -> slice:
        return slice(self.offset, self.offset + self.size)


@dataclass(frozen=True)
class IsotypicBasis:
    """Orthogonal change of basis exposing the isotypic block structure.

    Rows of ``q`` are the new basis vectors expressed in the original one,
    so ``q @ rho(g) @ q.T`` is block-diagonal and equals, inside block
    ``i``, the direct sum of ``multiplicity`` copies of the stored irrep
    matrices.
    """

    q: np.ndarray
    blocks: tuple
    source_rep: Representation
    tolerance_report: dict

    def __post_init__(self):
        object.__setattr__(self, "q", frozen_array(self.q))

    @property
    def dim(self) -> int:
        return self.q.shape[0]

    @property
    def group(self):
        return self.source_rep.group

    def rotated_rep(self, space_label: str = "") -> Representation:
        """The source representation conjugated into this basis."""
        mats = np.einsum("ij,gjk,lk->gil", self.q, self.source_rep.matrices, self.q)
        mats[0] = np.eye(self.dim)
        return Representation(self.group, mats, space_label or "isotypic")

    def block_diagonal_matrices(self) -> np.ndarray:
        """Exact block matrices ``(|G|, dim, dim)`` built from stored irreps."""
        out = np.zeros((self.group.order, self.dim, self.dim))
        for blk in self.blocks:
            d = blk.irrep.dim
            for j in range(blk.multiplicity):
                o = blk.offset + j * d
                out[:, o:o + d, o:o + d] = blk.irrep.matrices
        return out

    def conjugation_residual(self) -> float:
        rotated = np.einsum("ij,gjk,lk->gil", self.q, self.source_rep.matrices, self.q)
        return float(np.max(np.linalg.norm(rotated - self.block_diagonal_matrices(), axis=(1, 2))))

    def orthogonality_residual(self) -> float:
        return float(np.linalg.norm(self.q @ self.q.T - np.eye(self.dim)))

    def multiplicity_of(self, label: str) -> int:
        for blk in self.blocks:
            if blk.label == label:
                return blk.multiplicity
        return 0

    def layout_fingerprint(self) -> str:
        """Stable hash of the block layout, for checkpoint consistency checks."""
        layout = [
            [blk.label, blk.irrep.dim, blk.multiplicity, blk.offset, blk.irrep.endomorphism_dim]
            for blk in self.blocks
        ]
        return fingerprint({"group": self.group.descriptor, "dim": self.dim, "blocks": layout})


def character_projector(rep: Representation, irrep: Irrep) -> np.ndarray:
    """Orthogonal projector onto the isotypic component of ``irrep``.

    Uses the real character chi of the stored irrep matrices:
    ``P = d / (e |G|) * sum_g chi(g) rho(g)`` with ``e`` the irrep's
    endomorphism dimension, so rotation-type conjugate pairs are covered
    jointly and the result stays idempotent.
    """
    if rep.group != irrep.group:
        raise ValueError("representation and irrep belong to different groups")
    chi = irrep.character()
    scale = irrep.dim / (irrep.endomorphism_dim * rep.group.order)
    return scale * np.einsum("g,gij->ij", chi, rep.matrices)


def _matrix_unit(rep: Representation, irrep: Irrep, k: int, l: int) -> np.ndarray:
    """Transfer operator ``(d/|G|) sum_g irrep(g)[k, l] rho(g)``.

    Maps the ``l``-th basis slot of an irrep copy to the ``k``-th; the
    ``(0, 0)`` unit is the seed projector used to pick out copies.
    """
    coeff = irrep.matrices[:, k, l]
    scale = irrep.dim / rep.group.order
    return scale * np.einsum("g,gij->ij", coeff, rep.matrices)


def _projector_rank(p: np.ndarray) -> int:
    """Rank of a symmetric idempotent via eigenvalue counting at 0.5."""
    eigs = np.linalg.eigvalsh(0.5 * (p + p.T))
    return int(np.sum(eigs > 0.5))


def isotypic_basis(rep: Representation, table: IrrepTable | None = None) -> IsotypicBasis:
    """Compute an isotypic basis of ``rep``.

    Copies inside a component are aligned so the conjugated block equals
    exact direct sums of the stored irrep matrices: seeds are drawn from
    the image of the ``(0, 0)`` matrix-unit projector, each copy's basis
    is generated by the ``(k, 0)`` transfer operators, and copies are
    orthonormalized jointly.  Blocks with multiplicity zero are omitted.

    Raises
    ------
    DecompositionError
        If the conjugation residual exceeds 1e-6 after refinement.
    """
    if table is None:
        table = irreps_real(rep.group)
    if table.group != rep.group:
        raise ValueError("irrep table belongs to a different group")
    dim = rep.dim
    rows = []
    blocks = []
    offset = 0
    for irrep in table:
        d = irrep.dim
        proj = character_projector(rep, irrep)
        rank = _projector_rank(proj)
        if rank % d:
            raise DecompositionError(
                f"isotypic component of {irrep.label} has rank {rank}, not a multiple of {d}"
            )
        mult = rank // d
        if mult == 0:
            continue
        units = [_matrix_unit(rep, irrep, k, 0) for k in range(d)]
        block_vecs = _align_copies(units, mult, irrep.label)
        rows.extend(block_vecs)
        blocks.append(IsotypicBlock(irrep, mult, offset))
        offset += d * mult
    if offset != dim:
        raise DecompositionError(
            f"isotypic blocks account for {offset} of {dim} dimensions"
        )
    q = _joint_orthonormalize(np.array(rows))
    basis = IsotypicBasis(q, tuple(blocks), rep, {})
    report = {
        "orthogonality": basis.orthogonality_residual(),
        "conjugation": basis.conjugation_residual(),
    }
    object.__setattr__(basis, "tolerance_report", report)
    if report["conjugation"] > 1e-6:
        raise DecompositionError(
            f"conjugation residual {report['conjugation']:.3e} exceeds 1e-6",
            residual=report["conjugation"],
        )
    return basis


def _align_copies(units, mult, label):
    """Pick copy seeds from the seed projector image and generate copies.

    Seeds are chosen greedily from the columns of the seed projector
    (largest residual against the span already generated, ties broken by
    the smaller column index).  The whole copy inherits the seed's sign,
    fixed so the seed's largest-magnitude entry is positive; flipping a
    full copy leaves the conjugated irrep block unchanged.
    """
    seed_proj = units[0]
    dim = seed_proj.shape[0]
    d = len(units)
    copies = []
    span = np.zeros((dim, 0))
    for _ in range(mult):
        resid = seed_proj - span @ (span.T @ seed_proj)
        norms = np.linalg.norm(resid, axis=0)
        j = int(np.argmax(norms))
        if norms[j] < 1e-8:
            raise DecompositionError(
                f"could not extract {mult} copies of {label}: seed residual {norms[j]:.3e}"
            )
        seed = resid[:, j] / norms[j]
        # Reproject once for numerical orthogonality against earlier copies.
        if span.shape[1]:
            seed = seed - span @ (span.T @ seed)
            seed = seed / np.linalg.norm(seed)
        pivot = int(np.argmax(np.abs(seed)))
        if seed[pivot] < 0:
            seed = -seed
        vecs = [u @ seed for u in units]
        copies.append((pivot, len(copies), vecs))
        span = np.concatenate([span, np.stack(vecs, axis=1)], axis=1)
    copies.sort(key=lambda item: (item[0], item[1]))
    out = []
    for _, _, vecs in copies:
        out.extend(vecs)
    return out


def _joint_orthonormalize(rows: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt cleanup preserving row order and near-identity."""
    q = rows.astype(np.float64).copy()
    n = q.shape[0]
    for i in range(n):
        for j in range(i):
            q[i] -= (q[j] @ q[i]) * q[j]
        nrm = np.linalg.norm(q[i])
        if nrm < 1e-10:
            raise DecompositionError(f"basis row {i} degenerated during orthonormalization")
        q[i] /= nrm
    return q


def isotypic_project(x: np.ndarray, basis: IsotypicBasis, block_index: int) -> np.ndarray:
    """Component of ``x`` in one isotypic block, expressed in the original basis.

    Accepts ``(..., dim)`` input.  Components over all blocks sum back to
    ``x`` and are mutually orthogonal.
    """
    if not 0 <= block_index < len(basis.blocks):
        raise IndexError(f"block index {block_index} out of range ({len(basis.blocks)} blocks)")
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != basis.dim:
        raise ValueError(f"vector width {x.shape[-1]} does not match dim {basis.dim}")
    qb = basis.q[basis.blocks[block_index].slice]
    return (x @ qb.T) @ qb


def is_g_stable(subspace_basis: np.ndarray, rep: Representation, tol: float = 1e-9) -> bool:
    """Whether the span of the given column vectors is preserved by the group.

    Measured as the largest residual of ``rho(g) V`` after projection onto
    ``span(V)``.  Rank-deficient input is rejected.
    """
    v = np.atleast_2d(np.asarray(subspace_basis, dtype=np.float64))
    if v.shape[0] != rep.dim:
        raise ValueError(f"subspace basis must have {rep.dim} rows")
    svals = np.linalg.svd(v, compute_uv=False)
    if svals.size == 0 or svals[-1] < 1e-10 * max(1.0, svals[0]):
        raise ValueError("subspace basis columns are not linearly independent")
    u, _ = np.linalg.qr(v)
    moved = np.einsum("gij,jk->gik", rep.matrices, u)
    resid = moved - np.einsum("ij,gjk->gik", u @ u.T, moved)
    return float(np.max(np.linalg.norm(resid, axis=(1, 2)))) <= tol


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def basis_to_json(basis: IsotypicBasis) -> dict:
    return {
        "group": basis.group.descriptor,
        "dim": basis.dim,
        "blocks": [
            {"irrep": blk.label, "d": blk.irrep.dim, "m": blk.multiplicity, "offset": blk.offset}
            for blk in basis.blocks
        ],
        "q": [float(v) for v in basis.q.reshape(-1)],
        "tolerance_report": dict(basis.tolerance_report),
    }


def save_isotypic_basis(basis: IsotypicBasis, path):
    Path(path).write_text(json.dumps(basis_to_json(basis), sort_keys=True))


def load_isotypic_basis(path, source_rep: Representation) -> IsotypicBasis:
    """Load a stored basis and re-verify its invariants against ``source_rep``.

    Files whose recomputed orthogonality or conjugation residuals exceed
    ten times the recorded tolerances are rejected.
    """
    doc = json.loads(Path(path).read_text())
    if doc["group"] != source_rep.group.descriptor:
        raise ValueError(
            f"stored basis is for group {doc['group']}, not {source_rep.group.descriptor}"
        )
    dim = int(doc["dim"])
    if dim != source_rep.dim:
        raise ValueError(f"stored basis dim {dim} does not match representation dim {source_rep.dim}")
    table = irreps_real(source_rep.group)
    by_label = {ir.label: ir for ir in table}
    blocks = []
    for entry in doc["blocks"]:
        irrep = by_label.get(entry["irrep"])
        if irrep is None or irrep.dim != entry["d"]:
            raise ValueError(f"unknown irrep block {entry['irrep']!r}")
        blocks.append(IsotypicBlock(irrep, int(entry["m"]), int(entry["offset"])))
    q = np.array(doc["q"], dtype=np.float64).reshape(dim, dim)
    basis = IsotypicBasis(q, tuple(blocks), source_rep, dict(doc["tolerance_report"]))
    recorded = doc["tolerance_report"]
    floor = 1e-12
    checks = {
        "orthogonality": basis.orthogonality_residual(),
        "conjugation": basis.conjugation_residual(),
    }
    for key, value in checks.items():
        allowed = 10.0 * max(float(recorded.get(key, 0.0)), floor)
        if value > allowed:
            raise ValueError(
                f"stored basis fails verification: {key} residual {value:.3e} > {allowed:.3e}"
            )
    return basis
