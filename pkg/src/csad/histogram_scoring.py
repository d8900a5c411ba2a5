"""Class/patch histograms and Mahalanobis scoring against a fitted bank.

Histograms exclude background (class 0): entry k-1 holds the area fraction
of class k. Compositional histograms have singular sample covariance, so the
bank applies scaled ridge regularization before factorizing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimMismatch, TooFewSamples
from .tensor_io import LabelMap

EPS_REL = 1e-3
EPS_ABS = 1e-9


def class_histogram(label_map: LabelMap, n_cls: int) -> np.ndarray:
    """Per-class pixel fraction over the whole map, classes 1..n_cls."""
    counts = np.bincount(label_map.pixels.ravel(), minlength=n_cls + 1)
    return counts[1:n_cls + 1] / label_map.pixels.size


def _cell_slices(extent: int, s: int):
    return [slice(a, min(a + s, extent)) for a in range(0, extent, s)]


def patch_histogram(label_map: LabelMap, patch_size: int, n_cls: int) -> np.ndarray:
    """Concatenated per-grid-cell class histograms, row-major cells.

    Each cell is normalized by its own pixel count; boundary cells of a
    non-divisible grid are smaller but stay comparable.
    """
    if patch_size > max(label_map.height, label_map.width):
        raise DimMismatch("patch size exceeds image size")
    px = label_map.pixels
    parts = []
    for rs in _cell_slices(label_map.height, patch_size):
        for cs in _cell_slices(label_map.width, patch_size):
            cell = px[rs, cs]
            counts = np.bincount(cell.ravel(), minlength=n_cls + 1)
            parts.append(counts[1:n_cls + 1] / cell.size)
    return np.concatenate(parts)


def grid_shape(height: int, width: int, patch_size: int) -> tuple[int, int]:
    return (-(-height // patch_size), -(-width // patch_size))


def histogram_match_distance(h1, h2) -> float:
    """Mean absolute per-class difference between two histogram vectors."""
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    if h1.shape != h2.shape:
        raise DimMismatch(f"histogram dims differ: {h1.shape} vs {h2.shape}")
    return float(np.mean(np.abs(h1 - h2)))


@dataclass(frozen=True)
class HistogramBank:
    """Fitted mean and regularized covariance of training histograms."""

    mean: np.ndarray
    chol_lower: np.ndarray   # Cholesky factor of the regularized covariance
    eps_rel: float
    eps_abs: float
    patch_size: int
    n_cls: int

    @property
    def dim(self) -> int:
        return len(self.mean)


def fit_bank(histograms, patch_size: int = 0, n_cls: int = 0,
             eps_rel: float = EPS_REL, eps_abs: float = EPS_ABS) -> HistogramBank:
    """Sample mean/covariance (n-1 divisor) with scaled ridge regularization."""
    hs = np.asarray(histograms, dtype=float)
    if hs.ndim != 2 or len(hs) < 2:
        raise TooFewSamples("fitting a bank needs >= 2 histogram samples")
    mean = hs.mean(axis=0)
    centered = hs - mean
    cov = centered.T @ centered / (len(hs) - 1)
    d = cov.shape[0]
    ridge = eps_rel * (np.trace(cov) / d + eps_abs)
    reg = cov + ridge * np.eye(d)
    chol = np.linalg.cholesky(reg)
    return HistogramBank(mean=mean, chol_lower=chol, eps_rel=eps_rel,
                         eps_abs=eps_abs, patch_size=patch_size, n_cls=n_cls)


def mahalanobis_score(bank: HistogramBank, h) -> float:
    """sqrt((h-mu)^T Sigma_reg^{-1} (h-mu)) via a triangular solve."""
    h = np.asarray(h, dtype=float)
    if h.shape != bank.mean.shape:
        raise DimMismatch(f"histogram dim {h.shape} vs bank dim {bank.mean.shape}")
    z = solve_triangular(bank.chol_lower, h - bank.mean, lower=True)
    return float(np.linalg.norm(z))


_BANK_MAGIC = b"CSHB"


def save_bank(bank: HistogramBank, path) -> None:
    d = bank.dim
    header = _BANK_MAGIC + struct.pack("<IIIdd", 1, d, bank.n_cls,
                                       bank.eps_rel, bank.eps_abs)
    header += struct.pack("<I", bank.patch_size)
    payload = bank.mean.astype("<f8").tobytes() + bank.chol_lower.astype("<f8").tobytes()
    Path(path).write_bytes(header + payload)


def load_bank(path) -> HistogramBank:
    raw = Path(path).read_bytes()
    if raw[:4] != _BANK_MAGIC:
        raise DimMismatch(f"{path}: not a histogram bank file")
    version, d, n_cls, eps_rel, eps_abs = struct.unpack_from("<IIIdd", raw, 4)
    (patch_size,) = struct.unpack_from("<I", raw, 4 + 4 * 3 + 8 * 2)
    off = 4 + 4 * 3 + 8 * 2 + 4
    mean = np.frombuffer(raw, dtype="<f8", count=d, offset=off).copy()
    chol = np.frombuffer(raw, dtype="<f8", count=d * d,
                         offset=off + 8 * d).reshape(d, d).copy()
    return HistogramBank(mean=mean, chol_lower=chol, eps_rel=eps_rel,
                         eps_abs=eps_abs, patch_size=patch_size, n_cls=n_cls)
