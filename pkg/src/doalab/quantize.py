"""Low-resolution ADC model: Lloyd-Max quantization and AQNM loss factors.

The Lloyd-Max codebook for a unit-variance Gaussian is computed once per
bit depth by centroid/boundary fixed-point iteration and cached; the
additive quantization noise model (AQNM) linearizes the quantizer as gain
``alpha = 1 - rho_b`` plus uncorrelated noise.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .arrays import ANALOG_COMBINED, ELEMENT, QUANTIZED, SnapshotBatch

_codebook_cache: dict = {}


def _phi(x):
    return np.exp(-x * x / 2.0) / np.sqrt(2.0 * np.pi)


def lloyd_max_codebook(bits: int, tol: float = 1e-10, max_iter: int = 200_000):
    """Optimal levels and distortion for a b-bit scalar Gaussian quantizer.

    Returns (levels, thresholds, rho) where ``levels`` are the 2^b
    reproduction points, ``thresholds`` the 2^b - 1 decision boundaries,
    and ``rho`` the mean-square distortion for unit input variance.
    """
    if bits < 1:
        raise ValueError("bits must be >= 1")
    if bits in _codebook_cache:
        return _codebook_cache[bits]
    n = 1 << bits
    # start from the Gaussian quantile lattice; converges for all b tested
    from scipy.special import erfinv

    c = np.sqrt(2.0) * erfinv(2.0 * (np.arange(n) + 0.5) / n - 1.0)
    for _ in range(max_iter):
        t = (c[:-1] + c[1:]) / 2.0
        lo = np.concatenate(([-np.inf], t))
        hi = np.concatenate((t, [np.inf]))
        prob = ndtr(hi) - ndtr(lo)
        num = np.where(np.isfinite(lo), _phi(lo), 0.0) - np.where(np.isfinite(hi), _phi(hi), 0.0)
        c_next = num / prob
        if np.max(np.abs(c_next - c)) < tol:
            c = c_next
            break
        c = c_next
    t = (c[:-1] + c[1:]) / 2.0
    prob = ndtr(np.concatenate((t, [np.inf]))) - ndtr(np.concatenate(([-np.inf], t)))
    # centroid codebooks satisfy E[q^2] = E[qx], so rho = 1 - E[q^2]
    rho = float(1.0 - np.sum(prob * c * c))
    _codebook_cache[bits] = (c, t, rho)
    return _codebook_cache[bits]


def distortion_factor(bits) -> float:
    """Minimum MSE of a b-bit Lloyd-Max quantizer for unit-variance Gaussian input."""
    if bits == math.inf:
        return 0.0
    if bits < 1:
        raise ValueError("bits must be >= 1 or infinite")
    return lloyd_max_codebook(int(bits))[2]


@dataclass(frozen=True)
class QuantizerConfig:
    """Bit depth with its distortion factor rho and AQNM gain alpha."""

    bits: float
    rho: float
    alpha: float

    def __post_init__(self):
        if self.bits != math.inf:
            if self.bits < 1:
                raise ValueError("bits must be >= 1 or infinite")
            if not 0.0 < self.rho < 1.0:
                raise ValueError("rho must lie in (0, 1) for finite bits")
        elif self.rho != 0.0:
            raise ValueError("infinite bits means rho = 0")
        if not np.isclose(self.alpha, 1.0 - self.rho):
            raise ValueError("alpha must equal 1 - rho")

    @classmethod
    def from_bits(cls, bits) -> "QuantizerConfig":
        rho = distortion_factor(bits)
        return cls(float(bits), rho, 1.0 - rho)


def _quantize_real(x: np.ndarray, levels: np.ndarray, thresholds: np.ndarray):
    return levels[np.digitize(x, thresholds)]


def quantize(batch: SnapshotBatch, q: QuantizerConfig,
             scale: np.ndarray | None = None) -> SnapshotBatch:
    """Quantize real and imaginary parts with the Lloyd-Max codebook.

    The codebook is scaled per channel by the RMS of the batch (per real
    dimension), an automatic gain control matching the AQNM assumption.
    Pass ``scale`` to reuse a fixed codebook scaling; the scale used is
    stored in ``meta['quant_scale']``.  All-zero channels produce zeros and
    are flagged in ``meta['degenerate_channels']``.
    """
    if batch.stage not in (ELEMENT, ANALOG_COMBINED):
        raise ValueError(f"cannot quantize stage {batch.stage!r}")
    if q.bits == math.inf:
        return SnapshotBatch(batch.samples.copy(), QUANTIZED, batch.channel_map,
                             dict(batch.meta, quant_scale=None))
    levels, thresholds, _ = lloyd_max_codebook(int(q.bits))
    x = batch.samples
    if scale is None:
        scale = np.sqrt(np.mean(np.abs(x) ** 2, axis=1) / 2.0)
    scale = np.asarray(scale, dtype=float)
    degenerate = np.flatnonzero(scale <= 0.0)
    safe = np.where(scale > 0.0, scale, 1.0)[:, None]
    out = safe * (_quantize_real(x.real / safe, levels, thresholds)
                  + 1j * _quantize_real(x.imag / safe, levels, thresholds))
    out[degenerate] = 0.0
    meta = dict(batch.meta, quant_scale=scale)
    if degenerate.size:
        meta["degenerate_channels"] = tuple(int(i) for i in degenerate)
    return SnapshotBatch(out, QUANTIZED, batch.channel_map, meta)


def effective_snr(snr_linear: float, alpha: float) -> float:
    """Post-quantization SNR under the AQNM: signal gains alpha^2, plus
    alpha(1-alpha) (signal + noise) quantization noise."""
    if not snr_linear > 0:
        raise ValueError("snr_linear must be positive")
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    return alpha * snr_linear / (alpha + (1.0 - alpha) * (1.0 + snr_linear))


def performance_loss_db(bits, snr_db: float) -> float:
    """CRLB/SNR loss in dB from b-bit quantization at the given SNR."""
    if bits == math.inf:
        return 0.0
    alpha = 1.0 - distortion_factor(bits)
    snr = 10.0 ** (snr_db / 10.0)
    return 10.0 * np.log10(snr / effective_snr(snr, alpha))
