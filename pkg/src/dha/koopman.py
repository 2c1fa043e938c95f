"""Global linear model fitting on trajectory data.

Four variants share one interface: closed-form least squares on fixed
observables (``edmd``, and ``eedmd`` restricted to the commutant so the
operator is block-diagonal in the isotypic basis), and gradient-trained
dynamics autoencoders (``dae``, ``dae_aug`` with group data augmentation,
and the equivariant ``edae`` whose encoder/decoder are equivariant
networks and whose operator lives in the latent commutant).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from ._util import decode_f64, encode_f64, fingerprint, fmt17
from .commutant import (
    EquivariantLinearMap,
    assemble,
    commutant_basis,
    coordinates,
)
from .groups import Representation, quadratic_features, regular_rep_copies, symmetric_square_rep, rep_direct_sum
from .isotypic import IsotypicBasis, isotypic_basis
from .nets import (
    Network,
    TrainingDivergenceError,
    adam_init,
    adam_step,
    default_hidden_width,
    dense_net,
    equivariant_net,
)
from .systems import TrajectoryDataset, rep_descriptor, rep_from_descriptor

__all__ = [
    "NumericOverflowError",
    "TrainConfig",
    "KoopmanModel",
    "snapshot_pairs",
    "edmd_fit",
    "eedmd_fit",
    "dae_loss",
    "train",
    "predict",
    "predict_batch",
    "n_trainable_params",
    "save_model",
    "load_model",
    "save_metrics_csv",
]

VARIANTS = ("edmd", "eedmd", "dae", "dae_aug", "edae")


class NumericOverflowError(RuntimeError):
    """Non-finite intermediate during loss evaluation; ``.horizon_step`` names h."""

    def __init__(self, message, horizon_step=None):
        super().__init__(message)
        self.horizon_step = horizon_step


# ---------------------------------------------------------------------------
# Closed-form fits
# ---------------------------------------------------------------------------


def snapshot_pairs(dataset: TrajectoryDataset, splits=("train", "val")) -> tuple:
    """Stack one-step snapshot pairs ``(X, Y)`` of shape ``(dim, N)``."""
    xs, ys = [], []
    for i, tag in enumerate(dataset.splits):
        if tag in splits:
            traj = dataset.trajectories[i]
            xs.append(traj[:-1])
            ys.append(traj[1:])
    if not xs:
        raise ValueError(f"dataset has no trajectories in splits {splits}")
    return np.concatenate(xs).T, np.concatenate(ys).T


def default_ridge(x: np.ndarray) -> float:
    """Scale-aware tiny ridge: ``1e-9 * trace(X X^T) / m``."""
    return 1e-9 * float(np.sum(x * x)) / x.shape[0]


def edmd_fit(x: np.ndarray, y: np.ndarray, ridge: float | None = None) -> np.ndarray:
    """Least-squares operator minimizing ``||Y - K X||_F^2 + ridge ||K||_F^2``.

    ``x`` and ``y`` are ``(m, N)`` snapshot matrices.  ``ridge=None`` uses
    :func:`default_ridge`; ``ridge=0`` on rank-deficient data follows the
    pseudo-inverse (minimum-norm) convention.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 2:
        raise ValueError(f"snapshot matrices must share shape (m, N); got {x.shape} and {y.shape}")
    if ridge is None:
        ridge = default_ridge(x)
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    if ridge == 0.0:
        kt, *_ = np.linalg.lstsq(x.T, y.T, rcond=None)
        return np.ascontiguousarray(kt.T)
    gram = x @ x.T + ridge * np.eye(x.shape[0])
    return np.ascontiguousarray(np.linalg.solve(gram, x @ y.T).T)


def eedmd_fit(
    x: np.ndarray,
    y: np.ndarray,
    basis: IsotypicBasis,
    ridge: float | None = None,
) -> EquivariantLinearMap:
    """Ridge least squares restricted to the commutant of the state rep.

    Snapshots are rotated into the isotypic basis and the operator is
    solved in the free coordinates of the commutant basis, which keeps it
    exactly block-diagonal.  With ``ridge=0`` and full-rank group-augmented
    data this equals the group-averaging projection of the plain
    :func:`edmd_fit` solution on the augmented snapshots.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.shape[0] != basis.dim:
        raise ValueError("snapshot matrices must be (dim, N) for the basis dimension")
    if ridge is None:
        ridge = default_ridge(x)
    cbasis = commutant_basis(basis.rotated_rep(), basis.blocks)
    xr, yr = basis.q @ x, basis.q @ y
    bx = np.einsum("lij,jn->lin", cbasis.basis_matrices, xr)
    gram = np.einsum("lin,kin->lk", bx, bx) + ridge * np.eye(len(cbasis))
    rhs = np.einsum("lin,in->l", bx, yr)
    if ridge == 0.0:
        theta, *_ = np.linalg.lstsq(gram, rhs, rcond=None)
    else:
        theta = np.linalg.solve(gram, rhs)
    return EquivariantLinearMap(cbasis, theta)


# ---------------------------------------------------------------------------
# Model container
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    """Hyperparameters for :func:`train`; unset widths follow the defaults."""

    latent_dim: int = 0
    horizon: int = 10
    gamma: float | None = None
    lr: float = 1e-3
    epochs: int = 300
    batch: int = 64
    seed: int = 0
    patience: int = 30
    hidden_layers: int = 4
    width: int | None = None
    max_windows: int | None = None
    ridge: float | None = None
    observable: str = "identity"
    decoder_equivariant: bool = True

    def config_hash(self) -> str:
        return fingerprint(asdict(self))


@dataclass
class KoopmanModel:
    """A fitted global linear model in one of the supported variants."""

    variant: str
    rep_x: Representation
    latent_dim: int
    k_matrix: np.ndarray
    observable: str = "identity"
    encoder: Network | None = None
    decoder: Network | None = None
    k_map: EquivariantLinearMap | None = None
    latent_iso: IsotypicBasis | None = None
    feature_iso: IsotypicBasis | None = None
    config: TrainConfig | None = None
    training_report: dict | None = None

    @property
    def state_dim(self) -> int:
        return self.rep_x.dim

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.k_matrix))))

    @property
    def diverging(self) -> bool:
        """Flag for latent dynamics with spectral radius above 1.05."""
        return self.spectral_radius > 1.05

    def encode(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.variant in ("edmd", "eedmd"):
            return _features(x, self.observable)
        z, _ = self.encoder.forward(x)
        return z

    def decode(self, z: np.ndarray) -> np.ndarray:
        if self.variant in ("edmd", "eedmd"):
            return np.asarray(z)[..., : self.state_dim]
        x, _ = self.decoder.forward(z)
        return x

    def refresh_k(self):
        """Re-assemble the dense operator after a ``k_map`` coordinate update."""
        if self.k_map is not None:
            k_iso = assemble(self.k_map)
            if self.variant == "eedmd":
                q = self.feature_iso.q
                self.k_matrix = q.T @ k_iso @ q
            else:
                self.k_matrix = k_iso


def _features(x: np.ndarray, observable: str) -> np.ndarray:
    if observable == "identity":
        return np.asarray(x, dtype=np.float64)
    if observable == "poly2":
        x = np.asarray(x, dtype=np.float64)
        return np.concatenate([x, quadratic_features(x)], axis=-1)
    raise ValueError(f"unknown observable map {observable!r}")


def _feature_rep(rep_x: Representation, observable: str) -> Representation:
    if observable == "identity":
        return rep_x
    return rep_direct_sum([rep_x, symmetric_square_rep(rep_x)], "features")


# ---------------------------------------------------------------------------
# The multi-step autoencoder loss
# ---------------------------------------------------------------------------


def dae_loss(model: KoopmanModel, window: np.ndarray, gamma: float | None = None):
    """Reconstruction plus latent prediction error over one window.

    ``window`` holds states ``x_t .. x_{t+H}``.  The loss is
    ``sum_{h=0..H} ||x_{t+h} - dec(K^h z_t)||^2 + gamma ||enc(x_{t+h}) - K^h z_t||^2``
    with ``z_t = enc(x_t)``; the ``h = 0`` latent term vanishes identically.
    Returns ``(loss, breakdown)`` with per-term and per-step values.
    """
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2 or window.shape[1] != model.state_dim:
        raise ValueError(f"window must be (H+1, {model.state_dim})")
    if gamma is None:
        gamma = float(np.sqrt(model.state_dim / model.latent_dim))
    H = window.shape[0] - 1
    z = model.encode(window)
    zhat = np.zeros_like(z)
    zhat[0] = z[0]
    with np.errstate(over="ignore", invalid="ignore"):
        for h in range(1, H + 1):
            zhat[h] = model.k_matrix @ zhat[h - 1]
            if not np.all(np.isfinite(zhat[h])):
                raise NumericOverflowError(f"latent rollout diverged at step h={h}", horizon_step=h)
        xhat = model.decode(zhat)
        recon_steps = np.sum((xhat - window) ** 2, axis=1)
        latent_steps = np.sum((zhat - z) ** 2, axis=1)
        latent_steps[0] = 0.0
    if not (np.all(np.isfinite(recon_steps)) and np.all(np.isfinite(latent_steps))):
        bad = int(np.argmax(~np.isfinite(recon_steps + latent_steps)))
        raise NumericOverflowError(f"non-finite loss term at step h={bad}", horizon_step=bad)
    loss = float(np.sum(recon_steps) + gamma * np.sum(latent_steps))
    breakdown = {
        "reconstruction": float(np.sum(recon_steps)),
        "latent": float(np.sum(latent_steps)),
        "gamma": float(gamma),
        "reconstruction_per_step": recon_steps.tolist(),
        "latent_per_step": latent_steps.tolist(),
    }
    return loss, breakdown


def _batch_loss_and_grads(encoder, decoder, k_mat, windows, gamma, need_grads=True):
    """Mean loss over a window batch plus gradients for enc/dec/K."""
    B, hp1, m = windows.shape
    H = hp1 - 1
    flat = windows.reshape(B * hp1, m)
    z_flat, enc_cache = encoder.forward(flat)
    L = z_flat.shape[1]
    z = z_flat.reshape(B, hp1, L)
    zhat = np.empty_like(z)
    zhat[:, 0] = z[:, 0]
    for h in range(1, hp1):
        zhat[:, h] = zhat[:, h - 1] @ k_mat.T
    xhat_flat, dec_cache = decoder.forward(zhat.reshape(B * hp1, L))
    xhat = xhat_flat.reshape(B, hp1, m)
    r = xhat - windows
    s = zhat - z
    s[:, 0] = 0.0
    recon = float(np.sum(r * r)) / B
    latent = float(np.sum(s * s)) / B
    loss = recon + gamma * latent
    if not np.isfinite(loss):
        raise TrainingDivergenceError("non-finite training loss")
    if not need_grads:
        return loss, recon, latent, None
    grads_dec, d_zhat_flat = decoder.backward(dec_cache, (2.0 / B) * r.reshape(B * hp1, m))
    d_zhat = d_zhat_flat.reshape(B, hp1, L).copy()
    d_zhat[:, 1:] += (2.0 * gamma / B) * s[:, 1:]
    dk = np.zeros_like(k_mat)
    a = d_zhat[:, H].copy()
    for h in range(H, 0, -1):
        dk += a.T @ zhat[:, h - 1]
        a = a @ k_mat + d_zhat[:, h - 1]
    d_z = (-2.0 * gamma / B) * s
    d_z[:, 0] = a
    grads_enc, _ = encoder.backward(enc_cache, d_z.reshape(B * hp1, L))
    return loss, recon, latent, (grads_enc, grads_dec, dk)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------


def _windows(dataset: TrajectoryDataset, tag: str, h: int) -> np.ndarray:
    trajs = dataset.split(tag)
    if trajs.shape[0] == 0:
        return np.zeros((0, h + 1, dataset.dim))
    T = trajs.shape[1] - 1
    if h > T:
        raise ValueError(f"window horizon {h} exceeds trajectory length {T}")
    starts = np.arange(T - h + 1)
    idx = starts[:, None] + np.arange(h + 1)[None, :]
    return trajs[:, idx].reshape(-1, h + 1, dataset.dim)


def _build_autoencoder(variant, rep_x, config, rng):
    group = rep_x.group
    m = rep_x.dim
    L = config.latent_dim
    width = config.width or default_hidden_width(group.order, m)
    hidden = [width] * config.hidden_layers
    if variant == "edae":
        if L % group.order:
            raise ValueError(
                f"latent_dim {L} is not a multiple of the group order {group.order}: "
                "the latent space is a stack of regular-representation copies"
            )
        if width % group.order:
            raise ValueError(f"hidden width {width} must be a multiple of the group order")
        latent_rep = regular_rep_copies(group, L, "Z")
        latent_iso = isotypic_basis(latent_rep)
        encoder = equivariant_net(rep_x, hidden, latent_rep, rng, output_transform=latent_iso.q)
        if config.decoder_equivariant:
            decoder = equivariant_net(latent_rep, hidden, rep_x, rng, input_transform=latent_iso.q.T)
        else:
            decoder = dense_net([L] + hidden + [m], rng)
        cbasis = commutant_basis(latent_iso.rotated_rep(), latent_iso.blocks)
        k_map = EquivariantLinearMap(cbasis, coordinates(np.eye(L), cbasis))
        return encoder, decoder, k_map, latent_iso
    encoder = dense_net([m] + hidden + [L], rng)
    decoder = dense_net([L] + hidden + [m], rng)
    return encoder, decoder, None, None


def _closed_form_model(variant, dataset, config) -> KoopmanModel:
    x, y = snapshot_pairs(dataset)
    fx, fy = _features(x.T, config.observable).T, _features(y.T, config.observable).T
    rep_f = _feature_rep(dataset.rep_x, config.observable)
    if variant == "edmd":
        k = edmd_fit(fx, fy, config.ridge)
        model = KoopmanModel(
            variant, dataset.rep_x, fx.shape[0], k,
            observable=config.observable, config=config,
        )
    else:
        iso = isotypic_basis(rep_f)
        emap = eedmd_fit(fx, fy, iso, config.ridge)
        model = KoopmanModel(
            variant, dataset.rep_x, fx.shape[0], np.zeros((fx.shape[0],) * 2),
            observable=config.observable, k_map=emap, feature_iso=iso, config=config,
        )
        model.refresh_k()
    train_mse = float(np.mean(np.sum((fy - model.k_matrix @ fx) ** 2, axis=0)))
    model.training_report = {
        "metrics": [
            {
                "epoch": 0,
                "train_loss": train_mse,
                "val_loss": train_mse,
                "recon_term": train_mse,
                "latent_term": 0.0,
                "spectral_radius": model.spectral_radius,
            }
        ],
        "best_epoch": 0,
        "n_snapshots": fx.shape[1],
        "seed": config.seed,
        "config_hash": config.config_hash(),
    }
    return model


def _model_params(model: KoopmanModel):
    k_param = model.k_map.theta.copy() if model.k_map is not None else model.k_matrix.copy()
    return model.encoder.parameters() + model.decoder.parameters() + [k_param]


def _apply_params(model: KoopmanModel, params):
    n_enc = 2 * len(model.encoder.layers)
    n_dec = 2 * len(model.decoder.layers)
    model.encoder.set_parameters(params[:n_enc])
    model.decoder.set_parameters(params[n_enc:n_enc + n_dec])
    k_param = params[n_enc + n_dec]
    if model.k_map is not None:
        model.k_map = EquivariantLinearMap(model.k_map.basis, k_param)
        model.refresh_k()
    else:
        model.k_matrix = k_param


def train(variant: str, dataset: TrajectoryDataset, config: TrainConfig) -> KoopmanModel:
    """Fit one model variant on the dataset's training split.

    Closed-form variants solve the snapshot least squares directly.
    Autoencoder variants run minibatch adaptive-moment descent over
    stride-1 windows of length ``horizon + 1``, track the validation loss
    each epoch, stop early after ``patience`` stagnant epochs and return
    the best-validation checkpoint.  ``gamma`` defaults to
    ``sqrt(state_dim / latent_dim)``.  Everything is deterministic given
    the config seed.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    if variant in ("edmd", "eedmd"):
        return _closed_form_model(variant, dataset, config)

    if config.latent_dim < 1:
        raise ValueError("latent_dim must be set for autoencoder variants")
    rep_x = dataset.rep_x
    m, L = rep_x.dim, config.latent_dim
    gamma = config.gamma if config.gamma is not None else float(np.sqrt(m / L))
    rng = np.random.default_rng(config.seed)
    encoder, decoder, k_map, latent_iso = _build_autoencoder(variant, rep_x, config, rng)
    model = KoopmanModel(
        variant, rep_x, L, np.eye(L), encoder=encoder, decoder=decoder,
        k_map=k_map, latent_iso=latent_iso, config=config,
    )
    if k_map is not None:
        model.refresh_k()

    windows = _windows(dataset, "train", config.horizon)
    if config.max_windows is not None and config.max_windows < windows.shape[0]:
        pick = rng.permutation(windows.shape[0])[: config.max_windows]
        windows = windows[np.sort(pick)]
    val_windows = _windows(dataset, "val", config.horizon)
    if windows.shape[0] == 0:
        raise ValueError("dataset provides no training windows")

    params = _model_params(model)
    state = adam_init(params)
    metrics = []
    best = {"val": np.inf, "params": [p.copy() for p in params], "epoch": -1}
    stale = 0
    n_win = windows.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n_win)
        if variant == "dae_aug":
            g_ids = rng.integers(0, rep_x.group.order, size=n_win)
        epoch_loss = epoch_recon = epoch_latent = 0.0
        n_batches = 0
        for start in range(0, n_win, config.batch):
            batch_idx = order[start:start + config.batch]
            batch = windows[batch_idx]
            if variant == "dae_aug":
                rho = rep_x.matrices[g_ids[batch_idx]]
                batch = np.einsum("bij,bhj->bhi", rho, batch)
            try:
                loss, recon, latent, grads = _batch_loss_and_grads(
                    model.encoder, model.decoder, model.k_matrix, batch, gamma
                )
            except TrainingDivergenceError as err:
                err.checkpoint = best["params"]
                raise
            grads_enc, grads_dec, dk = grads
            if model.k_map is not None:
                dk = np.tensordot(model.k_map.basis.basis_matrices, dk, axes=([1, 2], [0, 1]))
            try:
                params, state = adam_step(
                    params, grads_enc + grads_dec + [dk], state, lr=config.lr
                )
            except TrainingDivergenceError as err:
                err.checkpoint = best["params"]
                raise
            _apply_params(model, params)
            epoch_loss += loss
            epoch_recon += recon
            epoch_latent += latent
            n_batches += 1
        if val_windows.shape[0]:
            val_loss, _, _, _ = _batch_loss_and_grads(
                model.encoder, model.decoder, model.k_matrix, val_windows, gamma, need_grads=False
            )
        else:
            val_loss = epoch_loss / n_batches
        metrics.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss / n_batches,
                "val_loss": val_loss,
                "recon_term": epoch_recon / n_batches,
                "latent_term": epoch_latent / n_batches,
                "spectral_radius": model.spectral_radius,
            }
        )
        if val_loss < best["val"] - 1e-12:
            best = {"val": val_loss, "params": [p.copy() for p in params], "epoch": epoch}
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    _apply_params(model, best["params"])
    model.training_report = {
        "metrics": metrics,
        "best_epoch": best["epoch"],
        "gamma": gamma,
        "n_windows": int(n_win),
        "seed": config.seed,
        "config_hash": config.config_hash(),
    }
    return model


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------


def predict_batch(model: KoopmanModel, x0: np.ndarray, horizon: int) -> np.ndarray:
    """Decoded latent rollout for a batch of initial states.

    Returns ``(batch, horizon, state_dim)`` holding the predictions for
    steps ``1 .. horizon``.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    if x0.shape[1] != model.state_dim:
        raise ValueError(f"initial states must have width {model.state_dim}")
    out = np.zeros((x0.shape[0], horizon, model.state_dim))
    z = model.encode(x0)
    for h in range(horizon):
        z = z @ model.k_matrix.T
        out[:, h] = model.decode(z)
    return out


def predict(model: KoopmanModel, x0: np.ndarray, horizon: int) -> np.ndarray:
    """Predicted observable-space trajectory ``x_1 .. x_horizon`` (no x0)."""
    return predict_batch(model, np.asarray(x0)[None, :], horizon)[0]


def n_trainable_params(model: KoopmanModel) -> int:
    n = 0
    if model.encoder is not None:
        n += model.encoder.n_params() + model.decoder.n_params()
    if model.k_map is not None:
        n += model.k_map.theta.size
    elif model.variant in ("dae", "dae_aug"):
        n += model.k_matrix.size
    return int(n)


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_model(model: KoopmanModel, path):
    """JSON checkpoint: architecture header plus base64 float64 parameters."""
    cfg = asdict(model.config) if model.config is not None else {}
    header = {
        "variant": model.variant,
        "rep_x": rep_descriptor(model.rep_x),
        "latent_dim": model.latent_dim,
        "observable": model.observable,
        "config": cfg,
        "spectral_radius": model.spectral_radius,
    }
    if model.k_map is not None:
        header["basis_fingerprint"] = model.k_map.basis.layout_fingerprint()
        k_payload = {"kind": "theta", "data": encode_f64(model.k_map.theta)}
    else:
        k_payload = {"kind": "dense", "data": encode_f64(model.k_matrix)}
    doc = {
        "format": "dha-model-v1",
        "header": header,
        "k_payload": k_payload,
        "training_report": model.training_report,
    }
    if model.encoder is not None:
        flat = np.concatenate(
            [p.reshape(-1) for p in model.encoder.parameters() + model.decoder.parameters()]
        )
        doc["net_params"] = encode_f64(flat)
    Path(path).write_text(json.dumps(doc, sort_keys=True))


def load_model(path) -> KoopmanModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "dha-model-v1":
        raise ValueError("not a model checkpoint")
    header = doc["header"]
    rep_x = rep_from_descriptor(header["rep_x"])
    config = TrainConfig(**header["config"]) if header["config"] else TrainConfig()
    variant = header["variant"]
    if variant in ("edmd", "eedmd"):
        if variant == "edmd":
            k = decode_f64(doc["k_payload"]["data"], (header["latent_dim"],) * 2)
            model = KoopmanModel(variant, rep_x, header["latent_dim"], k,
                                 observable=header["observable"], config=config)
        else:
            iso = isotypic_basis(_feature_rep(rep_x, header["observable"]))
            cbasis = commutant_basis(iso.rotated_rep(), iso.blocks)
            if cbasis.layout_fingerprint() != header["basis_fingerprint"]:
                raise ValueError("checkpoint block layout does not match the rebuilt basis")
            theta = decode_f64(doc["k_payload"]["data"])
            model = KoopmanModel(variant, rep_x, header["latent_dim"],
                                 np.zeros((header["latent_dim"],) * 2),
                                 observable=header["observable"],
                                 k_map=EquivariantLinearMap(cbasis, theta),
                                 feature_iso=iso, config=config)
            model.refresh_k()
    else:
        rng = np.random.default_rng(config.seed)
        encoder, decoder, k_map, latent_iso = _build_autoencoder(variant, rep_x, config, rng)
        model = KoopmanModel(variant, rep_x, config.latent_dim, np.eye(config.latent_dim),
                             encoder=encoder, decoder=decoder, k_map=k_map,
                             latent_iso=latent_iso, config=config)
        if k_map is not None:
            if k_map.basis.layout_fingerprint() != header["basis_fingerprint"]:
                raise ValueError("checkpoint block layout does not match the rebuilt basis")
            theta = decode_f64(doc["k_payload"]["data"])
            k_param = theta
        else:
            k_param = decode_f64(doc["k_payload"]["data"], (config.latent_dim,) * 2)
        flat = decode_f64(doc["net_params"])
        params = []
        pos = 0
        for p in model.encoder.parameters() + model.decoder.parameters():
            params.append(flat[pos:pos + p.size].reshape(p.shape))
            pos += p.size
        if pos != flat.size:
            raise ValueError("checkpoint parameter payload does not match the architecture")
        _apply_params(model, params + [k_param])
    model.training_report = doc.get("training_report")
    return model


def save_metrics_csv(report: dict, path):
    """Write the per-epoch metrics table of a training report."""
    cols = ["epoch", "train_loss", "val_loss", "recon_term", "latent_term", "spectral_radius"]
    lines = [",".join(cols)]
    for row in report["metrics"]:
        lines.append(",".join(fmt17(row[c]) if c != "epoch" else str(row[c]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")
