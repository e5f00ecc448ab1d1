"""GS training loss and per-client loss prediction from pilot samples."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LossConfig",
    "l1_loss",
    "ssim",
    "gs_loss",
    "image_losses",
    "pilot_loss",
    "predict_client_loss",
    "true_client_loss",
]


@dataclass(frozen=True)
class LossConfig:
    lambda_loss: float = 0.2
    ssim_c1: float = 0.01**2
    ssim_c2: float = 0.03**2

    def __post_init__(self):
        if not 0.0 <= self.lambda_loss <= 1.0:
            raise ValueError("lambda_loss must lie in [0, 1]")
        if self.ssim_c1 <= 0 or self.ssim_c2 <= 0:
            raise ValueError("SSIM constants must be positive")


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def l1_loss(a, b) -> float:
    """Mean absolute difference over all elements."""
    a, b = _pair(a, b)
    return float(np.mean(np.abs(a - b)))


def ssim(a, b, cfg: LossConfig = LossConfig()) -> float:
    """SSIM from global image statistics (a single window covering the image)."""
    a, b = _pair(a, b)
    mu_a, mu_b = a.mean(), b.mean()
    var_a = np.mean((a - mu_a) ** 2)
    var_b = np.mean((b - mu_b) ** 2)
    cov = np.mean((a - mu_a) * (b - mu_b))
    c1, c2 = cfg.ssim_c1, cfg.ssim_c2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(num / den)


def gs_loss(a, b, cfg: LossConfig = LossConfig()) -> float:
    lam = cfg.lambda_loss
    return (1.0 - lam) * l1_loss(a, b) + lam * (1.0 - ssim(a, b, cfg))


def image_losses(dataset, indices=None, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Per-image losses of ``dataset`` (all images, or only ``indices``)."""
    idx = range(len(dataset)) if indices is None else [int(i) for i in indices]
    if dataset.precomputed_loss is not None:
        return np.asarray([dataset.precomputed_loss[i] for i in idx], dtype=float)
    if dataset.rendered is None:
        raise ValueError("dataset has neither rendered images nor precomputed losses")
    return np.asarray(
        [gs_loss(dataset.rendered[i], dataset.images[i], cfg) for i in idx], dtype=float
    )


def pilot_loss(pilot, dataset, cfg: LossConfig = LossConfig()) -> float:
    """Summed loss ``psi_k`` over the pilot images of one client.

    ``pilot`` is a PilotSet or a sequence of image indices.
    """
    indices = getattr(pilot, "indices", pilot)
    if len(indices) == 0:
        return 0.0
    return float(np.sum(image_losses(dataset, indices, cfg)))


def predict_client_loss(psi_k: float, d_size: int, pilot_size: int) -> float:
    """Scale the pilot loss to the full dataset: ``|D| / |D~| * psi``."""
    if pilot_size < 1:
        raise ValueError("pilot_size must be >= 1")
    if d_size < pilot_size:
        raise ValueError("d_size must be >= pilot_size")
    return d_size / pilot_size * psi_k


def true_client_loss(dataset, cfg: LossConfig = LossConfig()) -> float:
    """Exact ``pi_k``: the loss summed over every image of the client."""
    return float(np.sum(image_losses(dataset, None, cfg)))
