"""Multichannel spectral estimation.

Welch-averaged auto/cross power spectral density matrices on a power-of-two
frequency grid, per-bin log-determinants with a spectral floor, and the
inverse-Fourier extraction of the real cepstrum coefficients.
"""

from dataclasses import dataclass

import numpy as np
import scipy.signal

from .exceptions import NumericalError, ValidationError

HERMITIAN_TOL = 1e-10
IMAG_RESIDUE_TOL = 1e-8
DEFAULT_FLOOR = 1e-12


@dataclass(frozen=True)
class WelchParams:
    """Bundle of Welch estimation parameters (defaults match the library's)."""

    seg_len: int = 1024
    overlap: float = 0.5
    window: str = "hann"
    grid_size: int = 4096
    demean: bool = True


@dataclass(frozen=True)
class SpectrumMatrix:
    """F x c x c array of Hermitian spectral matrices on the full-circle grid.

    Frequencies are w_f = 2 pi f / F for f = 0..F-1.  ``kind`` is "auto" for
    signal PSD estimates and "transfer" for H(e^{iw}) H(e^{iw})^H matrices.
    """

    values: np.ndarray
    kind: str = "auto"

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=complex)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValidationError(
                f"spectrum values must be (F, c, c), got {arr.shape}"
            )
        if self.kind not in ("auto", "transfer"):
            raise ValidationError(f"unknown spectrum kind {self.kind!r}")
        object.__setattr__(self, "values", arr)

    @property
    def grid_size(self):
        return self.values.shape[0]

    @property
    def n_channels(self):
        return self.values.shape[1]

    @property
    def frequencies(self):
        return 2.0 * np.pi * np.arange(self.grid_size) / self.grid_size


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def welch_psd(x, seg_len=1024, overlap=0.5, window="hann", grid_size=4096,
              demean=True):
    """Welch estimate of the c x c power spectral density matrix of a signal.

    Windowed segments with fractional ``overlap`` are FFT'd onto a
    ``grid_size``-point grid (power of two, >= seg_len) and their outer
    products averaged; the window-energy normalization makes unit-variance
    white noise come out with unit diagonal PSD.  The result is Hermitian and
    positive semidefinite per bin up to round-off.

    Raises when fewer than two segments fit (the average would have undefined
    variance) or when the window has zero energy.
    """
    data = np.atleast_2d(np.asarray(x.channels if hasattr(x, "channels") else x,
                                    dtype=float))
    c, n = data.shape
    seg_len = int(seg_len)
    grid_size = int(grid_size)
    if seg_len < 2 or seg_len > n:
        raise ValidationError(f"seg_len {seg_len} must be in [2, {n}]")
    if not 0.0 <= overlap < 1.0:
        raise ValidationError(f"overlap {overlap} must lie in [0, 1)")
    if grid_size < seg_len:
        raise ValidationError("grid_size must be at least seg_len")
    if not _is_power_of_two(grid_size):
        raise ValidationError("grid_size must be a power of two")

    win = scipy.signal.get_window(window, seg_len, fftbins=True)
    energy = float(np.sum(win ** 2))
    if energy == 0.0:
        raise ValidationError("window has zero energy")

    if demean:
        data = data - data.mean(axis=1, keepdims=True)

    hop = max(1, int(round(seg_len * (1.0 - overlap))))
    starts = np.arange(0, n - seg_len + 1, hop)
    if starts.size < 2:
        raise ValidationError(
            f"only {starts.size} segment(s) fit; need at least 2 for a Welch average"
        )

    # (nseg, c, seg_len) windowed segments -> (nseg, c, F) spectra
    segs = np.stack([data[:, s : s + seg_len] for s in starts]) * win
    spectra = np.fft.fft(segs, n=grid_size, axis=-1)
    phi = np.einsum("scf,sdf->fcd", spectra, spectra.conj())
    phi /= starts.size * energy
    phi = 0.5 * (phi + np.conj(np.transpose(phi, (0, 2, 1))))
    return SpectrumMatrix(phi, kind="auto")


def spectrum_from_response(resp):
    """Transfer power spectrum H H^H from frequency-response samples (F, m, l)."""
    resp = np.asarray(resp, dtype=complex)
    if resp.ndim != 3:
        raise ValidationError("frequency response must be (F, m, l)")
    phi = np.einsum("fij,fkj->fik", resp, resp.conj())
    phi = 0.5 * (phi + np.conj(np.transpose(phi, (0, 2, 1))))
    return SpectrumMatrix(phi, kind="transfer")


def logdet_spectrum(phi, floor=DEFAULT_FLOOR):
    """Per-bin log|det| of a spectrum matrix via Hermitian eigenvalues.

    Eigenvalues below ``floor`` times the per-bin mean eigenvalue (trace/c)
    are raised to that level before taking logs, which regularizes
    near-singular bins without disturbing well-conditioned ones.
    """
    if floor <= 0:
        raise ValidationError("spectral floor must be positive")
    values = phi.values
    c = phi.n_channels
    scale = np.max(np.abs(values), axis=(1, 2))
    asym = np.max(np.abs(values - np.conj(np.transpose(values, (0, 2, 1)))),
                  axis=(1, 2))
    bad = asym > HERMITIAN_TOL * np.maximum(scale, np.finfo(float).tiny)
    if np.any(bad):
        f = int(np.argmax(bad))
        raise ValidationError(
            f"spectrum slice at bin {f} is non-Hermitian beyond tolerance"
        )
    traces = np.real(np.trace(values, axis1=1, axis2=2))
    if np.any(traces <= 0):
        raise NumericalError("spectrum has a bin with non-positive trace")
    eigs = np.linalg.eigvalsh(values)
    floored = np.maximum(eigs, floor * (traces / c)[:, None])
    return np.sum(np.log(floored), axis=1)


def inverse_fourier_coeffs(log_spec, K):
    """Real inverse-DFT coefficients c(0..K) of a sampled log spectrum.

    The log spectrum of a real system is even in frequency, so the
    coefficients are real; an imaginary residue above 1e-8 relative signals an
    asymmetric (invalid) input and raises.
    """
    log_spec = np.asarray(log_spec, dtype=float)
    if log_spec.ndim != 1:
        raise ValidationError("log spectrum must be one-dimensional")
    F = log_spec.size
    K = int(K)
    if K < 0 or K >= F / 2:
        raise ValidationError(f"K must satisfy 0 <= K < F/2 = {F / 2}")
    coeffs = np.fft.ifft(log_spec)
    scale = max(float(np.max(np.abs(log_spec))), np.finfo(float).eps)
    residue = float(np.max(np.abs(coeffs.imag)))
    if residue > IMAG_RESIDUE_TOL * scale:
        raise ValidationError(
            f"imaginary residue {residue:.2e} exceeds tolerance; "
            "the log spectrum is not symmetric (bad PSD input)"
        )
    return coeffs[: K + 1].real.copy()


def log_spectrum_from_coeffs(coeffs, grid_size=None, omegas=None):
    """Reconstruct the (two-sided, even) log spectrum from cepstrum coefficients.

    Evaluates c(0) + 2 sum_k c(k) cos(k w) either on the regular F-point grid
    or at explicit ``omegas``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if omegas is None:
        if grid_size is None:
            raise ValidationError("give either grid_size or omegas")
        omegas = 2.0 * np.pi * np.arange(int(grid_size)) / int(grid_size)
    else:
        omegas = np.asarray(omegas, dtype=float)
    k = np.arange(1, coeffs.size)
    return coeffs[0] + 2.0 * np.cos(np.outer(omegas, k)) @ coeffs[1:]
