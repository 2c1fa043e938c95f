"""Synthetic symmetric stochastic linear systems and trajectory datasets.

Systems evolve as ``x_{t+1} = A x_t + eps_t`` with an equivariant dynamics
matrix ``A``, isotropic white noise of scale ``sigma``, and optional
half-space constraints closed under the group action (so feasibility is a
group-invariant property).  Dataset generation draws training initial
states from a single quotient copy (the lexicographic-max orbit
representative) while test initial states cover all copies uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._util import canonical_json, encode_f64, decode_f64, fingerprint, fmt17, frozen_array
from .commutant import equivariance_residual, equivariant_project
from .groups import FiniteGroup, Representation, group_from_descriptor, regular_rep_copies

__all__ = [
    "InfeasibilityError",
    "SymmetricLinearSystem",
    "TrajectoryDataset",
    "random_symmetric_stable_system",
    "rollout",
    "system_noise",
    "orbit_representative",
    "generate_dataset",
    "save_dataset",
    "load_dataset",
    "import_trajectories",
    "rep_from_descriptor",
    "rep_descriptor",
]


class InfeasibilityError(RuntimeError):
    """Constraint handling failed to produce a feasible state."""


@dataclass(frozen=True)
class SymmetricLinearSystem:
    """A stable equivariant linear system with optional half-space constraints.

    The feasible set is ``{x : C x >= c}`` rowwise; the constraint rows are
    closed under the group action so that feasibility is group-invariant.
    """

    a: np.ndarray
    rep_x: Representation
    sigma: float
    constraint_rows: np.ndarray
    constraint_offsets: np.ndarray
    spectral_radius_target: float

    def __post_init__(self):
        object.__setattr__(self, "a", frozen_array(self.a))
        object.__setattr__(self, "constraint_rows", frozen_array(self.constraint_rows))
        object.__setattr__(self, "constraint_offsets", frozen_array(self.constraint_offsets))

    @property
    def dim(self) -> int:
        return self.a.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.constraint_rows.shape[0]

    def feasible(self, x, tol: float = 1e-9) -> bool:
        if self.n_constraints == 0:
            return True
        return bool(np.all(self.constraint_rows @ np.asarray(x) >= self.constraint_offsets - tol))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.a))))

    def constraints_closed(self, tol: float = 1e-10) -> bool:
        """Every transformed constraint row appears in the set with equal offset."""
        C, c = self.constraint_rows, self.constraint_offsets
        for g in self.rep_x.group.elements():
            moved = C @ self.rep_x.matrices[g]
            for k in range(C.shape[0]):
                dist = np.max(np.abs(C - moved[k]), axis=1) + np.abs(c - c[k])
                if float(np.min(dist)) > tol:
                    return False
        return True

    def fingerprint(self) -> str:
        return fingerprint(
            {
                "group": self.rep_x.group.descriptor,
                "dim": self.dim,
                "a": [fmt17(v) for v in self.a.reshape(-1)],
                "sigma": fmt17(self.sigma),
                "rows": [fmt17(v) for v in self.constraint_rows.reshape(-1)],
                "offsets": [fmt17(v) for v in self.constraint_offsets],
            }
        )


def random_symmetric_stable_system(
    group: FiniteGroup,
    rep_x: Representation,
    spectral_radius: float = 0.95,
    sigma: float = 0.0,
    n_constraints: int = 0,
    seed: int = 0,
    offset_range: tuple = (-2.0, -1.0),
    max_resample: int = 16,
) -> SymmetricLinearSystem:
    """Draw a random equivariant matrix, rescale it to the target radius.

    The raw matrix has i.i.d. normal entries and is projected onto the
    commutant by group averaging; constraint rows are random unit
    directions closed under the group action with a shared offset drawn
    from ``offset_range`` (negative values keep a neighbourhood of the
    origin feasible).
    """
    if rep_x.group != group:
        raise ValueError("rep_x is not a representation of the given group")
    if not 0.0 < spectral_radius < 1.0:
        raise ValueError(f"spectral radius target must lie in (0, 1), got {spectral_radius}")
    m = rep_x.dim
    rng = np.random.default_rng(seed)
    a = None
    for _ in range(max_resample):
        raw = rng.standard_normal((m, m))
        proj = equivariant_project(raw, rep_x)
        radius = float(np.max(np.abs(np.linalg.eigvals(proj))))
        if radius >= 1e-12:
            a = proj * (spectral_radius / radius)
            break
    if a is None:
        raise RuntimeError(
            f"equivariant projection produced a nilpotent matrix {max_resample} times in a row"
        )
    rows, offsets = [], []
    for _ in range(n_constraints):
        base = rng.standard_normal(m)
        base /= np.linalg.norm(base)
        off = rng.uniform(*offset_range)
        for g in group.elements():
            cand = base @ rep_x.matrices[group.inverse_table[g]]
            dup = any(
                np.max(np.abs(cand - r)) + abs(off - o) <= 1e-9 for r, o in zip(rows, offsets)
            )
            if not dup:
                rows.append(cand)
                offsets.append(off)
    C = np.array(rows) if rows else np.zeros((0, m))
    c = np.array(offsets) if offsets else np.zeros(0)
    system = SymmetricLinearSystem(a, rep_x, float(sigma), C, c, float(spectral_radius))
    assert equivariance_residual(system.a, rep_x) <= 1e-10
    assert abs(system.spectral_radius() - spectral_radius) <= 1e-8
    return system


def system_noise(system: SymmetricLinearSystem, steps: int, noise_seed: int) -> np.ndarray:
    """The exact noise sequence a rollout with this seed will consume.

    Counter-based: step ``t`` draws from a Philox stream keyed by
    ``noise_seed`` at counter block ``t``, so any step is reproducible
    independently of generation order and the sequence can be transformed
    (e.g. group-transported) before being replayed through ``rollout``.
    """
    out = np.zeros((steps, system.dim))
    if system.sigma == 0.0:
        return out
    for t in range(steps):
        gen = np.random.Generator(np.random.Philox(key=noise_seed, counter=[0, 0, t, 0]))
        out[t] = system.sigma * gen.standard_normal(system.dim)
    return out


def _project_constraints(x, C, c, max_passes: int = 8):
    for _ in range(max_passes):
        clean = True
        for k in range(C.shape[0]):
            gap = float(C[k] @ x - c[k])
            if gap < -1e-12:
                x = x - gap / float(C[k] @ C[k]) * C[k]
                clean = False
        if clean:
            return x
    # Cyclic projection converges geometrically; what 8 passes leave behind
    # on near-opposed rows is boundary slop, not infeasibility.
    worst = float(np.min(C @ x - c))
    if worst < -1e-6:
        raise InfeasibilityError(
            f"constraint projection did not converge in {max_passes} passes (violation {worst:.3e})"
        )
    return x


def rollout(
    system: SymmetricLinearSystem,
    x0: np.ndarray,
    steps: int,
    noise_seed: int = 0,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Simulate ``steps`` transitions; returns ``(steps + 1, dim)`` with row 0 = x0.

    Violated constraint rows are handled after each step by projection onto
    the offending half-space, iterated in row order for at most 8 passes.
    Pass ``noise`` to override the seeded stream (same shape as
    :func:`system_noise` returns).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (system.dim,):
        raise ValueError(f"initial state must have length {system.dim}")
    if not system.feasible(x0):
        raise InfeasibilityError("initial state violates the constraints")
    eps = system_noise(system, steps, noise_seed) if noise is None else np.asarray(noise)
    if eps.shape != (steps, system.dim):
        raise ValueError(f"noise must have shape ({steps}, {system.dim})")
    traj = np.zeros((steps + 1, system.dim))
    traj[0] = x0
    C, c = system.constraint_rows, system.constraint_offsets
    x = x0
    for t in range(steps):
        x = system.a @ x + eps[t]
        if C.shape[0]:
            x = _project_constraints(x, C, c)
        traj[t + 1] = x
    return traj


def orbit_representative(x: np.ndarray, rep_x: Representation):
    """Deterministic quotient-copy assignment.

    Returns ``(g_index, canonical_x)`` where ``canonical_x = rho(g) x`` is
    the lexicographically largest orbit element and ``g_index`` the
    smallest element id achieving it.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (rep_x.dim,):
        raise ValueError(f"vector length {x.shape} does not match dim {rep_x.dim}")
    candidates = np.einsum("gij,j->gi", rep_x.matrices, x)
    best = 0
    for g in range(1, rep_x.group.order):
        if tuple(candidates[g]) > tuple(candidates[best]):
            best = g
    return best, candidates[best]


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryDataset:
    """Fixed-length trajectories with split tags and provenance.

    ``trajectories`` has shape ``(n, horizon + 1, dim)``; ``splits`` holds
    one of ``train``/``val``/``test`` per trajectory.
    """

    trajectories: np.ndarray
    splits: tuple
    rep_x: Representation
    dt: float
    provenance: dict

    def __post_init__(self):
        object.__setattr__(self, "trajectories", frozen_array(self.trajectories))
        if not np.all(np.isfinite(self.trajectories)):
            raise ValueError("trajectories contain non-finite samples")

    @property
    def n_trajectories(self) -> int:
        return self.trajectories.shape[0]

    @property
    def horizon(self) -> int:
        return self.trajectories.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.trajectories.shape[2]

    def split(self, tag: str) -> np.ndarray:
        idx = [i for i, s in enumerate(self.splits) if s == tag]
        return self.trajectories[idx]


def _draw_feasible(rng, system, low, high, max_attempts=10_000):
    for _ in range(max_attempts):
        x = rng.uniform(low, high)
        if system.feasible(x):
            return x
    raise InfeasibilityError(
        f"fewer than 1 feasible sample in {max_attempts} draws from the initial box"
    )


def generate_dataset(
    system: SymmetricLinearSystem,
    n_train: int,
    n_test: int,
    horizon: int,
    init_box: float | tuple = 1.0,
    seed: int = 0,
) -> TrajectoryDataset:
    """Simulate a train/val/test trajectory dataset.

    Training initial states are drawn uniformly from the box and mapped to
    their canonical orbit representative, confining them to one quotient
    copy; test initial states are left untouched so they cover all copies.
    The last ~10% of training trajectories are re-tagged as validation.
    """
    if n_train < 1 or n_test < 0:
        raise ValueError("need at least one training trajectory")
    m = system.dim
    if np.isscalar(init_box):
        low, high = -float(init_box) * np.ones(m), float(init_box) * np.ones(m)
    else:
        low, high = (np.asarray(v, dtype=np.float64) for v in init_box)
    rng_train = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0,)))
    rng_test = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(1,)))
    trajs = np.zeros((n_train + n_test, horizon + 1, m))
    for i in range(n_train):
        x0 = _draw_feasible(rng_train, system, low, high)
        _, x0 = orbit_representative(x0, system.rep_x)
        trajs[i] = rollout(system, x0, horizon, noise_seed=_traj_noise_key(seed, i))
    for i in range(n_test):
        x0 = _draw_feasible(rng_test, system, low, high)
        trajs[n_train + i] = rollout(
            system, x0, horizon, noise_seed=_traj_noise_key(seed, n_train + i)
        )
    n_val = min(n_train - 1, max(1, round(0.1 * n_train))) if n_train >= 2 else 0
    splits = (
        ["train"] * (n_train - n_val) + ["val"] * n_val + ["test"] * n_test
    )
    provenance = {
        "system": system.fingerprint(),
        "seed": seed,
        "n_train": n_train,
        "n_val": n_val,
        "n_test": n_test,
        "horizon": horizon,
    }
    return TrajectoryDataset(trajs, tuple(splits), system.rep_x, 1.0, provenance)


def _traj_noise_key(seed: int, index: int) -> int:
    # Distinct 128-bit Philox keys per trajectory.
    return (int(seed) % (1 << 64)) + (int(index) << 64)


# ---------------------------------------------------------------------------
# Representation descriptors and file layout
# ---------------------------------------------------------------------------


def rep_descriptor(rep: Representation) -> dict:
    """JSON-serializable description; regular-copy stacks stay compact."""
    group = rep.group
    if rep.dim % group.order == 0:
        copies = rep.dim // group.order
        candidate = regular_rep_copies(group, rep.dim)
        if np.array_equal(candidate.matrices, rep.matrices):
            return {"group": group.descriptor, "kind": "regular_copies", "copies": copies}
    return {
        "group": group.descriptor,
        "kind": "explicit",
        "dim": rep.dim,
        "matrices": encode_f64(rep.matrices),
    }


def rep_from_descriptor(desc: dict) -> Representation:
    group = group_from_descriptor(desc["group"])
    if desc.get("kind", "regular_copies") == "regular_copies":
        return regular_rep_copies(group, int(desc["copies"]) * group.order, "X")
    mats = decode_f64(desc["matrices"], (group.order, int(desc["dim"]), int(desc["dim"])))
    return Representation(group, mats, "X")


def save_dataset(dataset: TrajectoryDataset, directory):
    """Write ``manifest.json`` plus one CSV per trajectory.

    CSV header is ``t,x0,x1,...``; floats carry 17 significant digits so
    the round trip is bit exact.  Output bytes are deterministic.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "dim": dataset.dim,
        "horizon": dataset.horizon,
        "dt": dataset.dt,
        "n_trajectories": dataset.n_trajectories,
        "splits": list(dataset.splits),
        "rep_x": rep_descriptor(dataset.rep_x),
        "provenance": dataset.provenance,
    }
    (directory / "manifest.json").write_text(canonical_json(manifest))
    header = "t," + ",".join(f"x{j}" for j in range(dataset.dim))
    for i in range(dataset.n_trajectories):
        lines = [header]
        for t in range(dataset.horizon + 1):
            lines.append(f"{t}," + ",".join(fmt17(v) for v in dataset.trajectories[i, t]))
        (directory / f"traj_{i:05d}.csv").write_text("\n".join(lines) + "\n")


def load_dataset(directory) -> TrajectoryDataset:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    n, dim, horizon = manifest["n_trajectories"], manifest["dim"], manifest["horizon"]
    trajs = np.zeros((n, horizon + 1, dim))
    for i in range(n):
        text = (directory / f"traj_{i:05d}.csv").read_text().strip().splitlines()
        for t, line in enumerate(text[1:]):
            trajs[i, t] = [float(v) for v in line.split(",")[1:]]
    rep = rep_from_descriptor(manifest["rep_x"])
    return TrajectoryDataset(
        trajs, tuple(manifest["splits"]), rep, float(manifest["dt"]), manifest.get("provenance", {})
    )


def import_trajectories(directory, rep_x: Representation | dict, splits=None) -> TrajectoryDataset:
    """Read externally produced trajectories in the dataset file layout.

    The caller supplies the representation acting on the recorded state
    (either a :class:`Representation` or a descriptor dict).  Any split
    tags or provenance present in the manifest are kept unless overridden.
    """
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    rep = rep_x if isinstance(rep_x, Representation) else rep_from_descriptor(rep_x)
    n, dim, horizon = manifest["n_trajectories"], manifest["dim"], manifest["horizon"]
    if rep.dim != dim:
        raise ValueError(f"representation dim {rep.dim} does not match recorded width {dim}")
    trajs = np.zeros((n, horizon + 1, dim))
    for i in range(n):
        text = (directory / f"traj_{i:05d}.csv").read_text().strip().splitlines()
        for t, line in enumerate(text[1:]):
            trajs[i, t] = [float(v) for v in line.split(",")[1:]]
    tags = tuple(splits) if splits is not None else tuple(manifest.get("splits", ["test"] * n))
    return TrajectoryDataset(trajs, tags, rep, float(manifest.get("dt", 1.0)), manifest.get("provenance", {}))
