"""Power cepstrum computations.

Three routes to the same coefficient sequence: the exact pole/zero formula,
the model route through the Smith-McMillan form of a transfer matrix, and the
model-free route from measured signals (Welch log-determinant spectra).  For
square systems the input/output difference of data cepstra recovers the
system cepstrum for every quefrency k >= 1; the zeroth coefficient is flagged
unreliable wherever an unknowable constant offset can enter.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ValidationError
from .ratpoly import RationalMatrix, poly_roots, pole_zero_polynomials, smith_mcmillan
from .spectral import (WelchParams, inverse_fourier_coeffs, logdet_spectrum,
                       spectrum_from_response, welch_psd)

PROVENANCES = ("exact", "model", "data")

_EXACT_IMAG_TOL = 1e-12


@dataclass(frozen=True)
class CepstrumSequence:
    """Real cepstrum coefficients c(0..K) with provenance metadata.

    ``zeroth_reliable`` is False whenever c(0) came through a log-determinant
    path (data, or model via the computational formula), where a constant
    offset from the unimodular transforms is unknowable.
    """

    coeffs: np.ndarray
    provenance: str
    zeroth_reliable: bool

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("cepstrum coefficients must be a non-empty vector")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("cepstrum coefficients must be finite")
        if self.provenance not in PROVENANCES:
            raise ValidationError(f"provenance must be one of {PROVENANCES}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def K(self):
        return self.coeffs.size - 1

    @property
    def quefrencies(self):
        return np.arange(self.coeffs.size)


def _check_conjugate_pairing(roots, what, tol=1e-6):
    roots = np.asarray(roots, dtype=complex)
    if roots.size == 0:
        return
    unpaired = roots[np.abs(roots.imag) > tol * np.maximum(np.abs(roots), 1.0)]
    if unpaired.size == 0:
        return
    target = np.sort_complex(np.conj(unpaired))
    if not np.allclose(np.sort_complex(unpaired), target, rtol=0, atol=tol):
        warnings.warn(
            f"{what} are not in conjugate pairs; the cepstrum may be non-real",
            RuntimeWarning,
            stacklevel=3,
        )


def exact_cepstrum(poles, zeros, gain, K):
    """Cepstrum from pole/zero lists and the gain.

    c(0) = log(gain^2) and c(k) = sum_j p_j^k / k - sum_j z_j^k / k for
    k >= 1.  All root moduli must be strictly below one (stable, minimum
    phase); the series diverges otherwise.  Imaginary parts cancel for
    conjugate-paired roots and the residue is discarded.
    """
    poles = np.asarray(poles, dtype=complex).ravel()
    zeros = np.asarray(zeros, dtype=complex).ravel()
    if gain <= 0:
        raise ValidationError("gain must be positive")
    for roots, what in ((poles, "pole"), (zeros, "zero")):
        if roots.size and np.max(np.abs(roots)) >= 1.0:
            worst = roots[np.argmax(np.abs(roots))]
            raise ValidationError(
                f"{what} {worst:.4f} has modulus >= 1; the cepstrum series diverges"
            )
    K = int(K)
    if K < 0:
        raise ValidationError("K must be non-negative")
    _check_conjugate_pairing(poles, "poles")
    _check_conjugate_pairing(zeros, "zeros")

    out = np.zeros(K + 1)
    out[0] = 2.0 * np.log(gain)
    if K >= 1:
        k = np.arange(1, K + 1)
        acc = np.zeros(K, dtype=complex)
        if poles.size:
            acc += np.sum(poles[:, None] ** k[None, :], axis=0)
        if zeros.size:
            acc -= np.sum(zeros[:, None] ** k[None, :], axis=0)
        acc /= k
        scale = max(float(np.max(np.abs(acc))), 1.0)
        if np.max(np.abs(acc.imag)) > _EXACT_IMAG_TOL * scale:
            warnings.warn(
                "imaginary residue above 1e-12 in exact cepstrum; "
                "check conjugate pairing of the roots",
                RuntimeWarning,
                stacklevel=2,
            )
        out[1:] = acc.real
    return CepstrumSequence(out, provenance="exact", zeroth_reliable=True)


def model_cepstrum(H, K, tol=1e-9):
    """Cepstrum of a transfer matrix via its Smith-McMillan form.

    Requires full normal rank min(m, l); the pole and zero polynomials of the
    form must be stable and minimum-phase.  The gain reaching c(0) is the
    product of the diagonal gains, which for square systems equals the
    determinant gain of the system, so the zeroth coefficient is reliable.
    """
    if not isinstance(H, RationalMatrix):
        H = RationalMatrix(H)
    smf = smith_mcmillan(H, tol=tol)
    m, l = H.shape
    if smf.normal_rank < min(m, l):
        raise ValidationError(
            f"transfer matrix is rank deficient: normal rank {smf.normal_rank} "
            f"< min(m, l) = {min(m, l)}"
        )
    b, a, g = pole_zero_polynomials(smf)
    poles = poly_roots(a) if a.degree >= 1 else np.empty(0, dtype=complex)
    zeros = poly_roots(b) if b.degree >= 1 else np.empty(0, dtype=complex)
    for roots, what in ((poles, "pole"), (zeros, "zero")):
        if roots.size and np.max(np.abs(roots)) >= 1.0:
            worst = roots[np.argmax(np.abs(roots))]
            raise ValidationError(
                f"system is not stable/minimum-phase: {what} at {worst:.4f} "
                "has modulus >= 1"
            )
    exact = exact_cepstrum(poles, zeros, abs(g), K)
    return CepstrumSequence(exact.coeffs, provenance="model", zeroth_reliable=True)


def cepstrum_from_frequency_response(resp, K, floor=1e-12):
    """Computational cepstrum from exact frequency-response samples.

    ``resp`` holds H(e^{iw}) on the full F-point grid, shape (F, m, m); the
    route is log det(H H^H) followed by the inverse Fourier transform.  The
    zeroth coefficient carries the unimodular-offset caveat and is flagged
    unreliable.
    """
    resp = np.asarray(resp, dtype=complex)
    if resp.ndim != 3 or resp.shape[1] != resp.shape[2]:
        raise ValidationError(
            "frequency response must be (F, m, m) with m = l for the "
            "log-determinant route"
        )
    phi = spectrum_from_response(resp)
    coeffs = inverse_fourier_coeffs(logdet_spectrum(phi, floor=floor), K)
    return CepstrumSequence(coeffs, provenance="model", zeroth_reliable=False)


def data_cepstrum(x, params=None, K=50):
    """Model-free cepstrum of a measured signal.

    Welch PSD matrix -> per-bin log-determinant -> inverse Fourier
    coefficients.  c(0) is stored but flagged unreliable.
    """
    params = params or WelchParams()
    phi = welch_psd(x, seg_len=params.seg_len, overlap=params.overlap,
                    window=params.window, grid_size=params.grid_size,
                    demean=params.demean)
    coeffs = inverse_fourier_coeffs(logdet_spectrum(phi), K)
    return CepstrumSequence(coeffs, provenance="data", zeroth_reliable=False)


def system_cepstrum_from_io(u, y, params=None, K=50):
    """Model-free system cepstrum from input and output records.

    Valid for square systems only (as many inputs as outputs): the system
    cepstrum is the coefficient-wise difference of the output and input data
    cepstra for every k >= 1.  c(0) is stored but unreliable, since the
    constant offset of the unimodular transforms cannot be observed from
    data.
    """
    if u.n_channels != y.n_channels:
        raise ValidationError(
            f"input has {u.n_channels} channels but output has {y.n_channels}; "
            "the data-driven cepstrum is only defined for square systems "
            "(no computational scheme exists for unequal channel counts)"
        )
    if u.n_samples != y.n_samples:
        raise ValidationError(
            f"input length {u.n_samples} != output length {y.n_samples}"
        )
    cu = data_cepstrum(u, params, K)
    cy = data_cepstrum(y, params, K)
    return CepstrumSequence(cy.coeffs - cu.coeffs, provenance="data",
                            zeroth_reliable=False)


def fingerprint_distance(a, b, weights=None):
    """Weighted Euclidean distance between two cepstra over k >= 1.

    The zeroth coefficient is excluded (unreliable for data/model paths).
    ``weights`` applies to k = 1..K and defaults to all ones.
    """
    if a.K != b.K:
        raise ValidationError(f"sequences have different K: {a.K} vs {b.K}")
    da = a.coeffs[1:] - b.coeffs[1:]
    if weights is None:
        w = np.ones(da.size)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != da.size:
            raise ValidationError(f"weights must have length {da.size}, got {w.size}")
        if np.any(w < 0):
            raise ValidationError("weights must be non-negative")
    return float(np.sqrt(np.sum(w * da * da)))


def truncation_tail_bound(alpha_mod, K):
    """Upper bound on the discarded cepstrum tail sum_{k>K} alpha^k / k.

    The geometric-over-k bound alpha^{K+1} / ((K+1)(1-alpha)) for the largest
    root modulus alpha < 1.
    """
    alpha_mod = float(alpha_mod)
    if not 0.0 <= alpha_mod < 1.0:
        raise ValidationError("root modulus must lie in [0, 1)")
    if alpha_mod == 0.0:
        return 0.0
    K = int(K)
    return alpha_mod ** (K + 1) / ((K + 1) * (1.0 - alpha_mod))


def truncation_order(alpha_mod, target):
    """Smallest K whose tail bound drops below ``target``."""
    if target <= 0:
        raise ValidationError("target must be positive")
    K = 0
    while truncation_tail_bound(alpha_mod, K) > target:
        K += 1
        if K > 10_000_000:
            raise ValidationError("target unreachable for this root modulus")
    return K
