"""Sample covariance, Hermitian eigendecomposition, and Root-MUSIC."""

from dataclasses import dataclass

import numpy as np

from .errors import EstimationError


@dataclass
class CovarianceEstimate:
    """Hermitian sample covariance with its sorted eigendecomposition.

    Eigenvalues are sorted descending; eigenvector phases are fixed by
    making the largest-magnitude component of each column real-positive,
    so decompositions are deterministic.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_snapshots: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs), axis=0)
    ref = vecs[idx, np.arange(vecs.shape[1])]
    phase = ref / np.where(np.abs(ref) > 0, np.abs(ref), 1.0)
    return vecs / phase


def sample_covariance(samples, n_snapshots: int | None = None) -> CovarianceEstimate:
    """R_hat = (1/L) sum_t x(t) x(t)^H with eigendecomposition attached.

    Accepts a SnapshotBatch or a plain channels x snapshots array.
    """
    x = np.asarray(getattr(samples, "samples", samples), dtype=np.complex128)
    if x.ndim != 2 or x.shape[1] < 1:
        raise ValueError("need a channels x snapshots array with >= 1 snapshot")
    l = x.shape[1]
    r = x @ x.conj().T / l
    r = (r + r.conj().T) / 2.0  # enforce exact Hermitian symmetry
    w, v = np.linalg.eigh(r)
    order = np.argsort(w)[::-1]
    return CovarianceEstimate(r, w[order], _fix_phases(v[:, order]),
                              n_snapshots if n_snapshots is not None else l)


def noise_projector(cov: CovarianceEstimate, n_sources: int) -> np.ndarray:
    """Projector E_n E_n^H onto the noise subspace."""
    en = cov.eigenvectors[:, n_sources:]
    return en @ en.conj().T


def root_music_polynomial(cov: CovarianceEstimate, n_sources: int) -> np.ndarray:
    """Coefficients (highest degree first) of z^(P-1) * a(1/z)^H C a(z)."""
    c = noise_projector(cov, n_sources)
    p = cov.dim
    # coefficient of z^l is the sum of the l-th superdiagonal of C
    coeffs = np.array([np.trace(c, offset=l) for l in range(p - 1, -p, -1)])
    return coeffs


def root_music(cov: CovarianceEstimate, n_sources: int, spacing: float = 0.5):
    """Root-MUSIC direction-sines, reduced to the principal interval.

    Roots the degree-2(P-1) noise-subspace polynomial (companion-matrix
    eigenvalues), keeps the ``n_sources`` roots inside the unit circle that
    lie closest to it, and maps each root phase phi to
    ``u = phi / (2 pi spacing)`` in [-1/(2 spacing), 1/(2 spacing)).

    With ``spacing > 0.5`` the result is ambiguous by construction; callers
    expand it to a candidate set.
    """
    if n_sources >= cov.dim:
        raise ValueError("n_sources must be smaller than the channel count")
    if not spacing > 0:
        raise ValueError("spacing must be positive")
    roots = np.roots(root_music_polynomial(cov, n_sources))
    inside = roots[np.abs(roots) <= 1.0 + 1e-9]
    if len(inside) < n_sources:
        raise EstimationError(
            f"only {len(inside)} unit-circle roots for {n_sources} sources"
        )
    # closest to the circle first; break ties toward smaller |phase|
    order = np.lexsort((np.abs(np.angle(inside)), -np.abs(inside)))
    chosen = inside[order[:n_sources]]
    phases = np.angle(chosen)
    phases[phases >= np.pi] = -np.pi  # keep the interval half-open
    u = phases / (2.0 * np.pi * spacing)
    return np.sort(u)


def music_spectrum_grid(cov: CovarianceEstimate, n_sources: int,
                        spacing: float = 0.5, n_grid: int = 1 << 20):
    """Grid evaluation of the MUSIC null spectrum a^H C a via FFT.

    Returns (u_grid, d) where d[j] = a(u_j)^H C a(u_j) >= 0; minima mark
    source directions.  Serves as the independent oracle for root_music.
    """
    c = noise_projector(cov, n_sources)
    p = cov.dim
    a = np.zeros(n_grid, dtype=np.complex128)
    for l in range(-(p - 1), p):
        a[l % n_grid] += np.trace(c, offset=l)
    # d_j = sum_l c_l exp(i l 2 pi j / n) = n * ifft(a)[j]
    d = np.real(n_grid * np.fft.ifft(a))
    omega = 2.0 * np.pi * np.arange(n_grid) / n_grid
    omega[omega >= np.pi] -= 2.0 * np.pi
    u = omega / (2.0 * np.pi * spacing)
    order = np.argsort(u)
    return u[order], d[order]
