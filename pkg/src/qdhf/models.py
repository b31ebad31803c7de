"""Latent measure models: a triplet-trained linear projection plus PCA and
auto-encoder baselines that reduce the same features without supervision."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np


@dataclass
class TrainConfig:
    """Shared optimizer settings.  Distances are always Euclidean."""

    margin: float = 0.05
    learning_rate: float = 1e-2
    epochs: int = 100
    finetune_epochs: int = 50
    minibatch: int = 32

    def validate(self):
        if self.margin < 0:
            raise ValueError("margin must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.minibatch < 1:
            raise ValueError("minibatch must be at least 1")


@dataclass
class LinearProjection:
    """Latent space z = W (y - offset).

    The offset centres the latent coordinates but cancels out of every
    pairwise distance, so triplet training leaves it fixed at the mean of
    the features it was fitted on and only the weights carry gradient.
    """

    weights: np.ndarray
    offset: np.ndarray

    @property
    def latent_dim(self) -> int:
        return self.weights.shape[0]

    def project(self, features: np.ndarray) -> np.ndarray:
        return self.weights @ (np.asarray(features, dtype=float) - self.offset)

    def project_batch(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.offset) @ self.weights.T


@dataclass
class PcaProjection:
    """Latent space spanned by the leading principal components."""

    mean: np.ndarray
    components: np.ndarray

    @property
    def latent_dim(self) -> int:
        return self.components.shape[0]

    def project(self, features: np.ndarray) -> np.ndarray:
        return self.components @ (np.asarray(features, dtype=float) - self.mean)

    def project_batch(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) @ self.components.T


@dataclass
class AutoEncoder:
    """Tanh auto-encoder whose bottleneck activations are the latent space.

    Inputs narrower than ``pad_dim`` are zero-padded so shallow feature
    spaces still pass through the fixed hidden width.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    w4: np.ndarray
    b4: np.ndarray
    raw_dim: int

    MIN_WIDTH = 64

    @property
    def pad_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def latent_dim(self) -> int:
        return self.w2.shape[0]

    def _pad(self, features: np.ndarray) -> np.ndarray:
        x = np.asarray(features, dtype=float)
        if x.shape[-1] == self.pad_dim:
            return x
        padded = np.zeros(x.shape[:-1] + (self.pad_dim,))
        padded[..., : x.shape[-1]] = x
        return padded

    def encode(self, features: np.ndarray) -> np.ndarray:
        x = self._pad(features)
        hidden = np.tanh(x @ self.w1.T + self.b1)
        return hidden @ self.w2.T + self.b2

    def decode(self, latent: np.ndarray) -> np.ndarray:
        hidden = np.tanh(np.asarray(latent, dtype=float) @ self.w3.T + self.b3)
        return hidden @ self.w4.T + self.b4

    def project(self, features: np.ndarray) -> np.ndarray:
        return self.encode(features)

    def project_batch(self, features: np.ndarray) -> np.ndarray:
        return self.encode(features)


LatentModel = Union[LinearProjection, PcaProjection, AutoEncoder]


def triplet_loss(
    z_ref: np.ndarray, z_close: np.ndarray, z_far: np.ndarray, margin: float = 0.05
) -> float:
    """Hinge on the margin between the preferred and the other distance."""
    d_close = float(np.linalg.norm(np.asarray(z_ref) - np.asarray(z_close)))
    d_far = float(np.linalg.norm(np.asarray(z_ref) - np.asarray(z_far)))
    return max(0.0, margin + d_close - d_far)


def _judgments_to_rows(
    features_by_id: Mapping[int, np.ndarray], judgments: Sequence
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Feature rows (ref, closer, farther) for a batch of judgments."""
    refs, closes, fars = [], [], []
    for j in judgments:
        t = j.triplet
        close_id, far_id = (t.a, t.b) if j.choice.value == "A" else (t.b, t.a)
        refs.append(features_by_id[t.ref])
        closes.append(features_by_id[close_id])
        fars.append(features_by_id[far_id])
    return (
        np.asarray(refs, dtype=float),
        np.asarray(closes, dtype=float),
        np.asarray(fars, dtype=float),
    )


def _hinge_terms(
    weights: np.ndarray, y_ref: np.ndarray, y_close: np.ndarray, y_far: np.ndarray, margin: float
):
    u = (y_ref - y_close) @ weights.T
    v = (y_ref - y_far) @ weights.T
    d_close = np.linalg.norm(u, axis=1)
    d_far = np.linalg.norm(v, axis=1)
    hinge = margin + d_close - d_far
    return u, v, d_close, d_far, hinge


def mean_triplet_loss(
    model: LinearProjection,
    features_by_id: Mapping[int, np.ndarray],
    judgments: Sequence,
    margin: float = 0.05,
) -> float:
    """Average triplet hinge loss over a judgment set."""
    if not judgments:
        raise ValueError("need at least one judgment")
    y_ref, y_close, y_far = _judgments_to_rows(features_by_id, judgments)
    _, _, _, _, hinge = _hinge_terms(model.weights, y_ref, y_close, y_far, margin)
    return float(np.mean(np.maximum(0.0, hinge)))


def mean_triplet_loss_grad(
    model: LinearProjection,
    features_by_id: Mapping[int, np.ndarray],
    judgments: Sequence,
    margin: float = 0.05,
) -> np.ndarray:
    """Gradient of ``mean_triplet_loss`` with respect to the weights."""
    if not judgments:
        raise ValueError("need at least one judgment")
    y_ref, y_close, y_far = _judgments_to_rows(features_by_id, judgments)
    return _batch_grad(model.weights, y_ref, y_close, y_far, margin)


def _batch_grad(
    weights: np.ndarray,
    y_ref: np.ndarray,
    y_close: np.ndarray,
    y_far: np.ndarray,
    margin: float,
) -> np.ndarray:
    u, v, d_close, d_far, hinge = _hinge_terms(weights, y_ref, y_close, y_far, margin)
    active = hinge > 0
    # unit latent differences; zero-distance terms contribute no gradient
    safe_close = np.where(d_close > 0, d_close, 1.0)
    safe_far = np.where(d_far > 0, d_far, 1.0)
    cu = (active & (d_close > 0)) / safe_close
    cv = (active & (d_far > 0)) / safe_far
    grad = (u * cu[:, None]).T @ (y_ref - y_close) - (v * cv[:, None]).T @ (y_ref - y_far)
    return grad / len(y_ref)


def train_projection(
    features_by_id: Mapping[int, np.ndarray],
    judgments: Sequence,
    cfg: TrainConfig,
    rng: np.random.Generator,
    init: Optional[LinearProjection] = None,
    latent_dim: int = 2,
    epochs: Optional[int] = None,
) -> LinearProjection:
    """Fit a linear projection to triplet judgments by minibatch gradient descent.

    Starts from ``init`` when given (warm restart), otherwise from small
    random weights centred on the mean of the referenced features.  Judgment
    order is reshuffled every epoch.  With zero epochs the initial model is
    returned unchanged.
    """
    cfg.validate()
    if not judgments:
        raise ValueError("need at least one judgment")
    y_ref, y_close, y_far = _judgments_to_rows(features_by_id, judgments)
    dim = y_ref.shape[1]
    if init is not None:
        weights = init.weights.copy()
        offset = init.offset.copy()
        if weights.shape != (init.latent_dim, dim):
            raise ValueError("init model dimension mismatch")
    else:
        weights = rng.normal(0.0, 1.0 / np.sqrt(dim), size=(latent_dim, dim))
        offset = np.concatenate([y_ref, y_close, y_far]).mean(axis=0)
    n = len(judgments)
    n_epochs = cfg.epochs if epochs is None else epochs
    for _ in range(n_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch):
            pick = order[lo : lo + cfg.minibatch]
            grad = _batch_grad(weights, y_ref[pick], y_close[pick], y_far[pick], cfg.margin)
            weights -= cfg.learning_rate * grad
    return LinearProjection(weights=weights, offset=offset)


def fit_pca(features: np.ndarray, latent_dim: int = 2) -> PcaProjection:
    """Principal components of a feature matrix, orientation fixed so each
    component's largest-magnitude entry is positive."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError("need an (n, d) feature matrix")
    n, dim = x.shape
    if not 1 <= latent_dim <= min(n, dim):
        raise ValueError("latent_dim must be between 1 and min(n_samples, n_features)")
    mean = x.mean(axis=0)
    centered = x - mean
    if n > 1:
        cov = (centered.T @ centered) / (n - 1)
    else:
        cov = np.zeros((dim, dim))
    eigvals, eigvecs = np.linalg.eigh(cov)
    components = eigvecs[:, ::-1][:, :latent_dim].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaProjection(mean=mean, components=components)


def _ae_init(raw_dim: int, latent_dim: int, hidden: int, rng: np.random.Generator) -> AutoEncoder:
    pad = max(raw_dim, AutoEncoder.MIN_WIDTH)

    def layer(out_dim, in_dim):
        return rng.normal(0.0, 1.0 / np.sqrt(in_dim), size=(out_dim, in_dim))

    return AutoEncoder(
        w1=layer(hidden, pad),
        b1=np.zeros(hidden),
        w2=layer(latent_dim, hidden),
        b2=np.zeros(latent_dim),
        w3=layer(hidden, latent_dim),
        b3=np.zeros(hidden),
        w4=layer(pad, hidden),
        b4=np.zeros(pad),
        raw_dim=raw_dim,
    )


def autoencoder_forward(model: AutoEncoder, features: np.ndarray):
    """Forward pass caching activations for backprop."""
    x = model._pad(np.atleast_2d(np.asarray(features, dtype=float)))
    h1 = np.tanh(x @ model.w1.T + model.b1)
    z = h1 @ model.w2.T + model.b2
    h2 = np.tanh(z @ model.w3.T + model.b3)
    recon = h2 @ model.w4.T + model.b4
    return x, h1, z, h2, recon


def reconstruction_loss(model: AutoEncoder, features: np.ndarray) -> float:
    """Mean squared reconstruction error over samples and padded dimensions."""
    x, _, _, _, recon = autoencoder_forward(model, features)
    return float(np.mean((recon - x) ** 2))


def autoencoder_grads(model: AutoEncoder, features: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss and gradients of every weight and bias for one batch."""
    x, h1, z, h2, recon = autoencoder_forward(model, features)
    n, dim = x.shape
    g4 = 2.0 * (recon - x) / (n * dim)
    grads = {"w4": g4.T @ h2, "b4": g4.sum(axis=0)}
    g3 = (g4 @ model.w4) * (1.0 - h2**2)
    grads["w3"] = g3.T @ z
    grads["b3"] = g3.sum(axis=0)
    g2 = g3 @ model.w3
    grads["w2"] = g2.T @ h1
    grads["b2"] = g2.sum(axis=0)
    g1 = (g2 @ model.w2) * (1.0 - h1**2)
    grads["w1"] = g1.T @ x
    grads["b1"] = g1.sum(axis=0)
    loss = float(np.mean((recon - x) ** 2))
    return loss, grads


def fit_autoencoder(
    features: np.ndarray,
    rng: np.random.Generator,
    cfg: TrainConfig,
    latent_dim: int = 2,
    hidden: int = 32,
    init: Optional[AutoEncoder] = None,
    epochs: Optional[int] = None,
) -> AutoEncoder:
    """Train (or continue training) an auto-encoder on raw features."""
    cfg.validate()
    x = np.asarray(features, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("need a non-empty (n, d) feature matrix")
    n, dim = x.shape
    if init is not None:
        if init.raw_dim != dim:
            raise ValueError("init model dimension mismatch")
        model = AutoEncoder(
            w1=init.w1.copy(),
            b1=init.b1.copy(),
            w2=init.w2.copy(),
            b2=init.b2.copy(),
            w3=init.w3.copy(),
            b3=init.b3.copy(),
            w4=init.w4.copy(),
            b4=init.b4.copy(),
            raw_dim=dim,
        )
    else:
        model = _ae_init(dim, latent_dim, hidden, rng)
    n_epochs = cfg.epochs if epochs is None else epochs
    for _ in range(n_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.minibatch):
            pick = order[lo : lo + cfg.minibatch]
            _, grads = autoencoder_grads(model, x[pick])
            for name, grad in grads.items():
                arr = getattr(model, name)
                arr -= cfg.learning_rate * grad
    return model


def model_to_dict(model: LatentModel) -> dict:
    """JSON-ready description of any latent model."""
    if isinstance(model, LinearProjection):
        return {
            "kind": "linear",
            "weights": model.weights.tolist(),
            "offset": model.offset.tolist(),
        }
    if isinstance(model, PcaProjection):
        return {
            "kind": "pca",
            "mean": model.mean.tolist(),
            "components": model.components.tolist(),
        }
    if isinstance(model, AutoEncoder):
        out = {"kind": "autoencoder", "raw_dim": model.raw_dim}
        for name in ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4"):
            out[name] = getattr(model, name).tolist()
        return out
    raise TypeError(f"not a latent model: {type(model)!r}")


def model_from_dict(data: dict) -> LatentModel:
    kind = data.get("kind")
    if kind == "linear":
        return LinearProjection(
            weights=np.asarray(data["weights"], dtype=float),
            offset=np.asarray(data["offset"], dtype=float),
        )
    if kind == "pca":
        return PcaProjection(
            mean=np.asarray(data["mean"], dtype=float),
            components=np.asarray(data["components"], dtype=float),
        )
    if kind == "autoencoder":
        arrays = {
            name: np.asarray(data[name], dtype=float)
            for name in ("w1", "b1", "w2", "b2", "w3", "b3", "w4", "b4")
        }
        return AutoEncoder(raw_dim=int(data["raw_dim"]), **arrays)
    raise ValueError(f"unknown model kind: {kind!r}")


def save_model(model: LatentModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model)))


def load_model(path) -> LatentModel:
    return model_from_dict(json.loads(Path(path).read_text()))
