"""Discrete-time LTI state-space models.

Simulation, transfer-matrix extraction, poles (eigenvalues of A) and
transmission zeros (generalized eigenvalues of the system pencil for square
systems, Smith-McMillan zero polynomial otherwise).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import NumericalError, ValidationError
from .ratpoly import Polynomial, RationalFunction, RationalMatrix, smith_mcmillan, \
    pole_zero_polynomials, poly_roots

DIM_CAP = 64

_ZERO_POLE_AMBIGUITY_TOL = 1e-6


@dataclass(frozen=True)
class StateSpaceModel:
    """x(k+1) = A x(k) + B u(k),  y(k) = C x(k) + D u(k)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        for name in "ABCD":
            arr = np.atleast_2d(np.asarray(getattr(self, name), dtype=float))
            object.__setattr__(self, name, arr)
        n, n2 = self.A.shape
        if n != n2:
            raise ValidationError(f"A must be square, got {self.A.shape}")
        if n > DIM_CAP:
            raise ValidationError(f"state dimension {n} exceeds cap {DIM_CAP}")
        if self.B.shape[0] != n:
            raise ValidationError(f"B must have {n} rows, got {self.B.shape}")
        if self.C.shape[1] != n:
            raise ValidationError(f"C must have {n} columns, got {self.C.shape}")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValidationError(
                f"D must be {self.C.shape[0]}x{self.B.shape[1]}, got {self.D.shape}"
            )

    @property
    def n(self):
        """Number of states."""
        return self.A.shape[0]

    @property
    def m(self):
        """Number of outputs."""
        return self.C.shape[0]

    @property
    def l(self):
        """Number of inputs."""
        return self.B.shape[1]

    def is_stable(self):
        return bool(np.all(np.abs(np.linalg.eigvals(self.A)) < 1.0))

    def is_minimal(self, tol=1e-9):
        """Controllability and observability ranks both equal n."""
        n = self.n
        ctrb = np.hstack([np.linalg.matrix_power(self.A, k) @ self.B for k in range(n)])
        obsv = np.vstack([self.C @ np.linalg.matrix_power(self.A, k) for k in range(n)])
        rc = np.linalg.matrix_rank(ctrb, tol=tol * max(1.0, np.abs(ctrb).max()))
        ro = np.linalg.matrix_rank(obsv, tol=tol * max(1.0, np.abs(obsv).max()))
        return bool(rc == n and ro == n)


@dataclass(frozen=True)
class SignalRecord:
    """Multichannel sampled signal: ``channels`` is (c, N), one row per channel."""

    channels: np.ndarray
    sample_time: float = 1.0
    labels: tuple = field(default=None)

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.channels, dtype=float))
        object.__setattr__(self, "channels", arr)
        c, N = arr.shape
        if N < 1 or c < 1:
            raise ValidationError("signal must have at least one channel and one sample")
        if self.sample_time <= 0:
            raise ValidationError("sample_time must be positive")
        labels = self.labels
        if labels is None:
            labels = tuple(f"ch{i + 1}" for i in range(c))
        labels = tuple(str(s) for s in labels)
        if len(labels) != c:
            raise ValidationError(f"expected {c} labels, got {len(labels)}")
        object.__setattr__(self, "labels", labels)

    @property
    def n_channels(self):
        return self.channels.shape[0]

    @property
    def n_samples(self):
        return self.channels.shape[1]

    def window(self, start, stop):
        """Sub-record over sample indices [start, stop)."""
        if not (0 <= start < stop <= self.n_samples):
            raise ValidationError(f"window [{start}, {stop}) out of range")
        return SignalRecord(self.channels[:, start:stop], self.sample_time, self.labels)


def simulate(model, u, x0=None, labels=None):
    """Run the state recursion over an input record; returns the output record.

    The input must have ``model.l`` channels; x0 defaults to the zero state.
    """
    if u.n_channels != model.l:
        raise ValidationError(
            f"input has {u.n_channels} channels, model expects {model.l}"
        )
    x = np.zeros(model.n) if x0 is None else np.asarray(x0, dtype=float).ravel()
    if x.size != model.n:
        raise ValidationError(f"x0 must have length {model.n}")
    A, B, C, D = model.A, model.B, model.C, model.D
    uu = u.channels
    N = u.n_samples
    y = np.empty((model.m, N))
    for k in range(N):
        uk = uu[:, k]
        y[:, k] = C @ x + D @ uk
        x = A @ x + B @ uk
    if labels is None:
        labels = tuple(f"y{i + 1}" for i in range(model.m))
    return SignalRecord(y, u.sample_time, labels)


def frequency_response(model, grid_size):
    """H(e^{i w_f}) on the full unit-circle grid w_f = 2 pi f / F.

    Returns a complex (F, m, l) array.  Raises if the resolvent is singular at
    a grid point (pole on the unit circle).
    """
    A, B, C, D = model.A, model.B, model.C, model.D
    omegas = 2.0 * np.pi * np.arange(grid_size) / grid_size
    out = np.empty((grid_size, model.m, model.l), dtype=complex)
    eye = np.eye(model.n)
    for f, w in enumerate(omegas):
        z = np.exp(1j * w)
        try:
            res = np.linalg.solve(z * eye - A, B)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"frequency response singular at omega={w:.6f}: pole on the unit circle"
            ) from exc
        out[f] = C @ res + D
    return out


def transfer_matrix(model, verify=True):
    """Transfer matrix H(z) = D + C (zI - A)^{-1} B as a RationalMatrix.

    Entry numerators come from the determinant identity
    det(zI - A + b c^T) = det(zI - A) (1 + c^T (zI - A)^{-1} b); each entry is
    reduced to coprime form.  With ``verify`` the entries are checked against
    the direct frequency response on a 64-point grid (1e-8 relative).
    """
    if not model.is_minimal():
        warnings.warn(
            "transfer_matrix: model is not minimal; entries will hide cancelled modes",
            RuntimeWarning,
            stacklevel=2,
        )
    A, B, C, D = model.A, model.B, model.C, model.D
    char = Polynomial(np.poly(A)[::-1])
    entries = []
    for i in range(model.m):
        row = []
        for j in range(model.l):
            rank_one = Polynomial(np.poly(A - np.outer(B[:, j], C[i, :]))[::-1])
            num = rank_one - char + D[i, j] * char
            # The z^n terms cancel exactly in theory; strip their round-off
            # residue so downstream degree decisions see the true degree.
            scale = max(rank_one.norm_inf(), char.norm_inf() * (1.0 + abs(D[i, j])))
            num = num.trim(1e-12, scale)
            if num.is_zero:
                row.append(RationalFunction.const(0.0))
            else:
                row.append(RationalFunction(num, char))
        entries.append(row)
    H = RationalMatrix(entries)
    if verify:
        _verify_transfer(model, H)
    return H


def _verify_transfer(model, H, n_points=64, rel_tol=1e-8):
    resp = frequency_response(model, n_points)
    zs = np.exp(2j * np.pi * np.arange(n_points) / n_points)
    approx = H.eval_grid(zs)
    scale = max(np.max(np.abs(resp)), 1.0)
    err = np.max(np.abs(approx - resp)) / scale
    if err > rel_tol:
        raise NumericalError(
            f"transfer_matrix: entries disagree with frequency response "
            f"(relative error {err:.2e})"
        )


def poles(model):
    """System poles: the eigenvalues of A, with multiplicity."""
    if model.n == 0:
        return np.empty(0, dtype=complex)
    return np.linalg.eigvals(model.A).astype(complex)


def transmission_zeros(model):
    """Finite transmission zeros.

    Square systems use the generalized eigenvalues of the pencil
    [[A - z I, B], [C, D]] versus [[I, 0], [0, 0]]; non-square systems fall
    back to the roots of the Smith-McMillan zero polynomial.  Zeros within
    1e-6 of a pole trigger a non-minimality warning.
    """
    if model.m == model.l:
        L = np.block([[model.A, model.B], [model.C, model.D]])
        M = np.zeros_like(L)
        M[: model.n, : model.n] = np.eye(model.n)
        try:
            ev = scipy.linalg.eigvals(L, M)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError("transmission_zeros: QZ iteration failed") from exc
        zeros = ev[np.isfinite(ev)].astype(complex)
    else:
        smf = smith_mcmillan(transfer_matrix(model))
        b, _, _ = pole_zero_polynomials(smf)
        zeros = poly_roots(b) if b.degree >= 1 else np.empty(0, dtype=complex)

    if zeros.size and model.n:
        pole_list = poles(model)
        dmin = np.min(np.abs(zeros[:, None] - pole_list[None, :]))
        if dmin < _ZERO_POLE_AMBIGUITY_TOL:
            warnings.warn(
                "transmission_zeros: a zero lies within 1e-6 of a pole; "
                "the realization may be non-minimal",
                RuntimeWarning,
                stacklevel=2,
            )
    return zeros[np.lexsort((zeros.imag, zeros.real))]


def _companion_siso(poles_k, zeros_k, gain_k):
    """Controllable canonical realization of gain * prod(z - zero)/prod(z - pole)."""
    a = np.real(np.polynomial.polynomial.polyfromroots(poles_k))
    b = np.real(np.polynomial.polynomial.polyfromroots(zeros_k))
    n = len(poles_k)
    if len(zeros_k) > n:
        raise ValidationError("entry has more zeros than poles (non-causal)")
    b_full = np.zeros(n + 1)
    b_full[: len(b)] = b
    A = np.zeros((n, n))
    if n > 1:
        A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a[:-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    d = gain_k * b_full[n]
    C = gain_k * (b_full[:n] - b_full[n] * a[:-1])
    return A, B, C.reshape(1, n), np.array([[d]])


def assemble_diagonal_model(pole_sets, zero_sets, gains):
    """Block-diagonal square model whose k-th channel realizes the k-th SISO entry."""
    blocks = [_companion_siso(p, z, g) for p, z, g in zip(pole_sets, zero_sets, gains)]
    c = len(blocks)
    n = sum(blk[0].shape[0] for blk in blocks)
    A = np.zeros((n, n))
    B = np.zeros((n, c))
    C = np.zeros((c, n))
    D = np.zeros((c, c))
    at = 0
    for k, (Ak, Bk, Ck, Dk) in enumerate(blocks):
        nk = Ak.shape[0]
        A[at : at + nk, at : at + nk] = Ak
        B[at : at + nk, k : k + 1] = Bk
        C[k : k + 1, at : at + nk] = Ck
        D[k, k] = Dk[0, 0]
        at += nk
    return StateSpaceModel(A, B, C, D)


def mix_model(model, left, right):
    """Constant input/output mixing: the new transfer matrix is left @ H @ right.

    Poles and transmission zeros are preserved when both matrices are square
    and invertible.
    """
    left = np.atleast_2d(np.asarray(left, dtype=float))
    right = np.atleast_2d(np.asarray(right, dtype=float))
    return StateSpaceModel(
        model.A, model.B @ right, left @ model.C, left @ model.D @ right
    )


def _conjugate_pair(rng, lo, hi):
    r = rng.uniform(lo, hi)
    th = rng.uniform(0.15, np.pi - 0.15)
    root = r * np.exp(1j * th)
    return [root, np.conj(root)]


def random_stable_model(rng, channels=3, order_per_channel=2,
                        pole_moduli=(0.1, 0.9), zero_moduli=(0.1, 0.95),
                        biproper=True):
    """Random stable, minimum-phase square model with known poles and zeros.

    Each channel gets a SISO entry whose poles/zeros are sampled in the given
    modulus bands (conjugate pairs for even orders, a real root for the odd
    leftover), assembled block-diagonally and mixed with random
    well-conditioned constant matrices.  Returns (model, poles, zeros).
    """
    if np.isscalar(order_per_channel):
        orders = [int(order_per_channel)] * channels
    else:
        orders = [int(o) for o in order_per_channel]
        if len(orders) != channels:
            raise ValidationError("order_per_channel length must match channels")
    pole_sets, zero_sets, gains = [], [], []
    for nk in orders:
        p, z = [], []
        while len(p) < nk - 1:
            p += _conjugate_pair(rng, *pole_moduli)
        if len(p) < nk:
            p.append(rng.uniform(*pole_moduli) * rng.choice([-1.0, 1.0]))
        n_zeros = nk if biproper else max(nk - 1, 0)
        while len(z) < n_zeros - 1:
            z += _conjugate_pair(rng, *zero_moduli)
        if len(z) < n_zeros:
            z.append(rng.uniform(*zero_moduli) * rng.choice([-1.0, 1.0]))
        pole_sets.append(np.array(p, dtype=complex))
        zero_sets.append(np.array(z, dtype=complex))
        gains.append(rng.uniform(0.5, 2.0))
    model = assemble_diagonal_model(pole_sets, zero_sets, gains)
    for _ in range(100):
        T1 = np.eye(channels) + 0.4 * rng.standard_normal((channels, channels))
        T2 = np.eye(channels) + 0.4 * rng.standard_normal((channels, channels))
        if np.linalg.cond(T1) < 8 and np.linalg.cond(T2) < 8:
            break
    model = mix_model(model, T1, T2)
    all_poles = np.concatenate(pole_sets) if pole_sets else np.empty(0, dtype=complex)
    all_zeros = np.concatenate(zero_sets) if zero_sets else np.empty(0, dtype=complex)
    return model, np.sort_complex(all_poles), np.sort_complex(all_zeros)


def showcase_3x3_model():
    """Fixed 3x3 model with documented poles and transmission zeros.

    Poles: 0.1786 +- 0.3300i, -0.2769 +- 0.1793i, 0.0634.
    Transmission zeros: -0.9681, 0.4419, 0.0916 +- 0.1453i.
    Built from three SISO blocks mixed by unimodular constant matrices, so
    the 3x3 transfer matrix is dense while the pole/zero sets stay exact.
    """
    pole_sets = [
        np.array([0.1786 + 0.3300j, 0.1786 - 0.3300j]),
        np.array([-0.2769 + 0.1793j, -0.2769 - 0.1793j]),
        np.array([0.0634 + 0.0j]),
    ]
    zero_sets = [
        np.array([-0.9681 + 0.0j, 0.4419 + 0.0j]),
        np.array([0.0916 + 0.1453j, 0.0916 - 0.1453j]),
        np.array([], dtype=complex),
    ]
    gains = [1.3, 0.8, 1.7]
    model = assemble_diagonal_model(pole_sets, zero_sets, gains)
    T1 = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]])
    T2 = np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
    return mix_model(model, T1, T2)
