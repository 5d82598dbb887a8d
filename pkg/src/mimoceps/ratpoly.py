"""Polynomials, rational functions, rational matrices, and the Smith-McMillan form.

Polynomials are stored densely in ascending powers of z.  Rational functions
keep monic numerator/denominator with the gain factored out, so that the gain
is directly the constant multiplying b(z)/a(z).  The Smith-McMillan reduction
works over a cleared common denominator and records the unimodular row/column
transforms together with their (constant) determinants.
"""

import warnings

import mpmath
import numpy as np
from numpy.polynomial import polynomial as npoly

from .exceptions import NumericalError, ValidationError

# Smith reduction at degrees much beyond this is numerically meaningless.
DEGREE_CAP = 64

# Relative remainder threshold for cancellation decisions (GCD, coprimality).
GCD_TOL = 1e-9

# Per-coefficient trim level, relative to the scale of the producing operation.
TRIM_TOL = 1e-12

_ROOT_CLUSTER_TOL = 1e-6


def _realify(arr, tol=1e-12):
    """Drop negligible imaginary parts of an array."""
    arr = np.asarray(arr)
    if not np.iscomplexobj(arr):
        return arr
    scale = np.max(np.abs(arr)) if arr.size else 0.0
    if scale == 0.0 or np.max(np.abs(arr.imag)) <= tol * scale:
        return np.ascontiguousarray(arr.real)
    return arr


class Polynomial:
    """Immutable dense polynomial in ascending powers of z.

    Trailing zero coefficients are trimmed so the leading coefficient is
    nonzero; the zero polynomial is the empty case with ``degree == -1``.
    Coefficients are float64 or complex128.
    """

    __slots__ = ("_c",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=None))
        if c.ndim != 1:
            raise ValidationError("polynomial coefficients must be one-dimensional")
        if not np.issubdtype(c.dtype, np.complexfloating):
            c = c.astype(np.float64)
        c = _realify(c, tol=0.0)  # only exact-zero imaginary parts
        nz = np.nonzero(c)[0]
        c = c[: nz[-1] + 1].copy() if nz.size else c[:0].copy()
        if not np.all(np.isfinite(c)):
            raise ValidationError("polynomial coefficients must be finite")
        if c.size - 1 > DEGREE_CAP:
            raise ValidationError(
                f"polynomial degree {c.size - 1} exceeds cap {DEGREE_CAP}"
            )
        c.flags.writeable = False
        self._c = c

    @classmethod
    def zero(cls):
        return cls([])

    @classmethod
    def one(cls):
        return cls([1.0])

    @classmethod
    def from_roots(cls, roots, leading=1.0):
        """Monic expansion from a root list, scaled by ``leading``."""
        roots = np.asarray(roots, dtype=complex)
        c = npoly.polyfromroots(roots) if roots.size else np.array([1.0])
        return cls(_realify(leading * c))

    @property
    def coeffs(self):
        """Read-only coefficient array, ascending powers; empty for the zero polynomial."""
        return self._c

    @property
    def degree(self):
        """Degree, with -1 as the sentinel for the zero polynomial."""
        return self._c.size - 1

    @property
    def is_zero(self):
        return self._c.size == 0

    @property
    def leading(self):
        if self.is_zero:
            raise ValidationError("zero polynomial has no leading coefficient")
        return self._c[-1]

    def norm_inf(self):
        return float(np.max(np.abs(self._c))) if self._c.size else 0.0

    def __call__(self, z):
        if self.is_zero:
            z = np.asarray(z)
            return np.zeros(z.shape, dtype=complex) if z.ndim else 0.0
        return npoly.polyval(z, self._c)

    def __add__(self, other):
        other = _as_poly(other)
        n = max(self._c.size, other._c.size)
        c = np.zeros(n, dtype=np.result_type(self._c.dtype, other._c.dtype, float))
        c[: self._c.size] += self._c
        c[: other._c.size] += other._c
        return Polynomial(c)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __neg__(self):
        return Polynomial(-self._c)

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self._c * other)
        other = _as_poly(other)
        if self.is_zero or other.is_zero:
            return Polynomial.zero()
        return Polynomial(np.convolve(self._c, other._c))

    __rmul__ = __mul__

    def monic(self):
        """Split into (gain, monic polynomial); errors on the zero polynomial."""
        lc = self.leading
        return lc, Polynomial(self._c / lc)

    def derivative(self):
        if self.degree < 1:
            return Polynomial.zero()
        return Polynomial(self._c[1:] * np.arange(1, self._c.size))

    def trim(self, tol, scale=None):
        """Zero out coefficients below ``tol * scale`` (scale defaults to own norm)."""
        if self.is_zero:
            return self
        s = self.norm_inf() if scale is None else scale
        c = np.where(np.abs(self._c) <= tol * s, 0.0, self._c)
        return Polynomial(c)

    def __repr__(self):
        if self.is_zero:
            return "Polynomial(0)"
        terms = []
        for k, ck in enumerate(self._c):
            if ck == 0:
                continue
            coef = f"{ck:.6g}" if not np.iscomplexobj(ck) else f"({ck:.6g})"
            terms.append(coef if k == 0 else f"{coef}*z^{k}" if k > 1 else f"{coef}*z")
        return "Polynomial(" + " + ".join(terms) + ")"


def _as_poly(p):
    return p if isinstance(p, Polynomial) else Polynomial(p)


def poly_mul(p, q):
    """Product of two polynomials; degree adds for nonzero inputs."""
    return _as_poly(p) * _as_poly(q)


def poly_divmod(p, q):
    """Euclidean division ``p = quo*q + rem`` with ``deg rem < deg q``."""
    p, q = _as_poly(p), _as_poly(q)
    if q.is_zero:
        raise ValidationError("polynomial division by zero")
    if p.is_zero or p.degree < q.degree:
        return Polynomial.zero(), p
    quo, rem = npoly.polydiv(p.coeffs, q.coeffs)
    return Polynomial(quo), Polynomial(rem)


def poly_gcd(p, q, tol=GCD_TOL):
    """Monic approximate greatest common divisor.

    Runs the Euclidean algorithm with monic-normalized operands; a remainder
    counts as zero once its relative infinity-norm drops below ``tol``.  Every
    root of the result lies near a root of both inputs.  A warning flags
    degenerate conditioning when the deciding remainder sits barely above the
    threshold.
    """
    p, q = _as_poly(p), _as_poly(q)
    if p.is_zero and q.is_zero:
        raise ValidationError("gcd of two zero polynomials is undefined")
    if p.is_zero:
        return q.monic()[1]
    if q.is_zero:
        return p.monic()[1]
    a = p.monic()[1]
    b = q.monic()[1]
    if a.degree < b.degree:
        a, b = b, a
    min_rel = np.inf
    while True:
        _, r = poly_divmod(a, b)
        rel = r.norm_inf() / max(a.norm_inf(), 1.0)
        if rel <= tol:
            if min_rel < 100 * tol:
                warnings.warn(
                    "poly_gcd: remainder norms close to tolerance; "
                    "gcd decision is ill-conditioned",
                    RuntimeWarning,
                    stacklevel=2,
                )
            return b.monic()[1]
        min_rel = min(min_rel, rel)
        if b.degree == 0:
            return Polynomial.one()
        a, b = b, r.monic()[1]


def poly_lcm(p, q, tol=GCD_TOL):
    """Monic least common multiple via the gcd."""
    p, q = _as_poly(p), _as_poly(q)
    if p.is_zero or q.is_zero:
        raise ValidationError("lcm with a zero polynomial is undefined")
    g = poly_gcd(p, q, tol)
    quo, rem = poly_divmod(p, g)
    if rem.norm_inf() > 1e-6 * max(p.norm_inf(), 1.0):
        raise NumericalError("poly_lcm: gcd does not divide its input cleanly")
    return (quo * q).monic()[1]


def poly_roots(p, max_iter=500, residual_tol=1e-8):
    """All roots of ``p`` with multiplicity.

    Uses the Aberth-Ehrlich simultaneous iteration with a companion-matrix
    fallback when the iteration stalls.  The scaled residual |p(root)| must
    drop below ``residual_tol`` times the coefficient-magnitude sum at the
    root; otherwise a NumericalError is raised.  Root clusters tighter than
    1e-6 trigger a multiplicity warning.
    """
    p = _as_poly(p)
    if p.degree < 1:
        raise ValidationError("poly_roots requires degree >= 1")
    c = p.coeffs
    # Exact zeros in the low-order coefficients are roots at the origin.
    n_origin = 0
    while n_origin < c.size - 1 and c[n_origin] == 0:
        n_origin += 1
    cc = np.asarray(c[n_origin:], dtype=complex)
    cc = cc / cc[-1]
    n = cc.size - 1

    roots = np.empty(0, dtype=complex)
    if n > 0:
        roots = _aberth(cc, max_iter)
        if roots is None or not _roots_ok(c, roots, residual_tol):
            roots = np.roots(cc[::-1])  # companion-matrix fallback
            if not _roots_ok(c, roots, residual_tol):
                raise NumericalError(
                    "poly_roots: no convergence within iteration cap "
                    "and companion fallback residuals exceed tolerance"
                )
    out = np.concatenate([roots, np.zeros(n_origin, dtype=complex)])
    out = out[np.lexsort((out.imag, out.real))]
    if out.size > 1:
        d = np.abs(out[:, None] - out[None, :])
        np.fill_diagonal(d, np.inf)
        if d.min() < _ROOT_CLUSTER_TOL:
            warnings.warn(
                "poly_roots: root cluster tighter than 1e-6; "
                "results near a multiple root may lose accuracy",
                RuntimeWarning,
                stacklevel=2,
            )
    return out


def _aberth(cc, max_iter):
    """Aberth-Ehrlich iteration on a monic coefficient array (ascending)."""
    n = cc.size - 1
    dc = npoly.polyder(cc)
    # Initial points on a circle sized by the geometric mean of root moduli,
    # rotated off the axes to avoid symmetry traps.
    c0 = abs(cc[0])
    radius = c0 ** (1.0 / n) if c0 > 0 else 0.5
    radius = min(max(radius, 1e-3), 1.0 + np.max(np.abs(cc[:-1])))
    angles = 2.0 * np.pi * (np.arange(n) + 0.357) / n + 0.4
    z = radius * np.exp(1j * angles)
    for _ in range(max_iter):
        pv = npoly.polyval(z, cc)
        dv = npoly.polyval(z, dc)
        dv = np.where(dv == 0, np.finfo(float).eps, dv)
        w = pv / dv
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = np.sum(1.0 / diff, axis=1)
        denom = 1.0 - w * s
        denom = np.where(denom == 0, np.finfo(float).eps, denom)
        step = w / denom
        z = z - step
        if np.max(np.abs(step)) <= 1e-14 * (1.0 + np.max(np.abs(z))):
            return z
    return None


def _roots_ok(coeffs, roots, tol):
    if not np.all(np.isfinite(roots)):
        return False
    mags = np.abs(np.asarray(coeffs))
    scale = np.array([np.sum(mags * np.abs(r) ** np.arange(mags.size)) for r in roots])
    resid = np.abs(npoly.polyval(roots, coeffs))
    return bool(np.all(resid <= tol * np.maximum(scale, np.finfo(float).tiny)))


class RationalFunction:
    """Rational function gain * num(z) / den(z) with monic num and den.

    The constructor factors leading coefficients into the gain and cancels
    common roots of numerator and denominator (coprimality is an invariant).
    """

    __slots__ = ("gain", "num", "den")

    def __init__(self, num, den, gain=1.0, tol=GCD_TOL, reduce=True):
        num, den = _as_poly(num), _as_poly(den)
        if den.is_zero:
            raise ValidationError("rational function denominator is zero")
        g = complex(gain)
        if not num.is_zero:
            lc_n, num = num.monic()
            g *= lc_n
        lc_d, den = den.monic()
        g /= lc_d
        if reduce and not num.is_zero and num.degree > 0 and den.degree > 0:
            common = poly_gcd(num, den, tol)
            if common.degree > 0:
                num = poly_divmod(num, common)[0].monic()[1]
                den = poly_divmod(den, common)[0].monic()[1]
        if abs(g.imag) > 1e-9 * max(abs(g), 1.0):
            raise ValidationError("rational function gain must be real")
        self.gain = float(g.real)
        self.num = num
        self.den = den

    @classmethod
    def const(cls, value):
        return cls(Polynomial([1.0]), Polynomial([1.0]), gain=value, reduce=False)

    @property
    def is_zero(self):
        return self.num.is_zero or self.gain == 0.0

    def __call__(self, z):
        if self.is_zero:
            z = np.asarray(z)
            return np.zeros(z.shape, dtype=complex) if z.ndim else 0.0
        return self.gain * self.num(z) / self.den(z)

    def __mul__(self, other):
        if np.isscalar(other):
            return RationalFunction(self.num, self.den, gain=self.gain * other, reduce=False)
        return RationalFunction(
            self.num * other.num, self.den * other.den, gain=self.gain * other.gain
        )

    __rmul__ = __mul__

    def poles(self):
        return poly_roots(self.den) if self.den.degree >= 1 else np.empty(0, dtype=complex)

    def zeros(self):
        return poly_roots(self.num) if self.num.degree >= 1 else np.empty(0, dtype=complex)

    def __repr__(self):
        return f"RationalFunction(gain={self.gain:.6g}, num={self.num!r}, den={self.den!r})"


class PolynomialMatrix:
    """Rectangular grid of Polynomial entries; supports pointwise evaluation."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        rows = [tuple(_as_poly(e) for e in row) for row in entries]
        if not rows or not rows[0]:
            raise ValidationError("polynomial matrix must be non-empty")
        if len({len(r) for r in rows}) != 1:
            raise ValidationError("polynomial matrix rows have unequal lengths")
        self.entries = tuple(rows)

    @classmethod
    def identity(cls, n):
        one, zero = Polynomial.one(), Polynomial.zero()
        return cls([[one if i == j else zero for j in range(n)] for i in range(n)])

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def eval(self, z):
        """Evaluate at scalar z, returning a complex (m, l) array."""
        m, l = self.shape
        out = np.empty((m, l), dtype=complex)
        for i in range(m):
            for j in range(l):
                out[i, j] = self.entries[i][j](z)
        return out

    def eval_grid(self, zs):
        """Evaluate at an array of points, returning (len(zs), m, l)."""
        zs = np.asarray(zs)
        m, l = self.shape
        out = np.empty(zs.shape + (m, l), dtype=complex)
        for i in range(m):
            for j in range(l):
                out[..., i, j] = self.entries[i][j](zs)
        return out


class RationalMatrix:
    """Matrix of RationalFunction entries (a transfer matrix)."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        rows = []
        for row in entries:
            rows.append(tuple(
                e if isinstance(e, RationalFunction) else RationalFunction.const(e)
                for e in row
            ))
        if not rows or not rows[0]:
            raise ValidationError("rational matrix must be non-empty")
        if len({len(r) for r in rows}) != 1:
            raise ValidationError("rational matrix rows have unequal lengths")
        self.entries = tuple(rows)

    @property
    def shape(self):
        return len(self.entries), len(self.entries[0])

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def eval(self, z):
        m, l = self.shape
        out = np.empty((m, l), dtype=complex)
        for i in range(m):
            for j in range(l):
                out[i, j] = self.entries[i][j](z)
        return out

    def eval_grid(self, zs):
        zs = np.asarray(zs)
        m, l = self.shape
        out = np.empty(zs.shape + (m, l), dtype=complex)
        for i in range(m):
            for j in range(l):
                out[..., i, j] = self.entries[i][j](zs)
        return out

    def normal_rank(self, n_samples=4, seed=0):
        """Rank at generic points (max over a few random unit-modulus samples)."""
        rng = np.random.default_rng(seed)
        zs = np.exp(1j * rng.uniform(0.3, 2 * np.pi, size=n_samples))
        return max(int(np.linalg.matrix_rank(self.eval(z))) for z in zs)


class SmithMcMillanForm:
    """Result of the Smith-McMillan reduction V1(z) H(z) V2(z) = M(z).

    ``diag`` holds the r nonzero pseudo-diagonal entries g_i b_i(z)/a_i(z)
    with the divisibility chain a_{i+1} | a_i and b_i | b_{i+1}.  ``left`` and
    ``right`` are the unimodular polynomial transforms; ``left_det_const`` and
    ``right_det_const`` are the constant determinants of their inverses,
    tracked exactly through the elementary operations and normalized so their
    product is 1.
    """

    __slots__ = ("diag", "left", "right", "left_det_const", "right_det_const",
                 "normal_rank", "shape")

    def __init__(self, diag, left, right, left_det_const, right_det_const, shape):
        self.diag = tuple(diag)
        self.left = left
        self.right = right
        self.left_det_const = complex(left_det_const)
        self.right_det_const = complex(right_det_const)
        self.normal_rank = len(self.diag)
        self.shape = shape

    def pseudo_diagonal(self, z):
        """Evaluate M(z) at a scalar point."""
        m, l = self.shape
        out = np.zeros((m, l), dtype=complex)
        for i, entry in enumerate(self.diag):
            out[i, i] = entry(z)
        return out


# ---------------------------------------------------------------------------
# List-based polynomial kernel for the Smith reduction.
#
# The elementary-operation cascade swells intermediate coefficients (the
# polynomial analogue of subresultant growth) and then cancels them back
# down; in double precision, badly conditioned inputs can lose the answer in
# that swell.  The cascade below therefore runs on plain coefficient lists
# with a pluggable scalar type: fast float/complex first, and an mpmath
# retry at 60 digits when the float pass fails its own reconstruction check.
# ---------------------------------------------------------------------------

_MP_DPS = 60


def _lp_strip(c):
    k = len(c)
    while k > 0 and c[k - 1] == 0:
        k -= 1
    del c[k:]
    return c


def _lp_norm(c):
    return max((abs(x) for x in c), default=0.0)


def _lp_degree_trim(c, rel):
    """Tolerance-based degree decision: drop junk leading coefficients."""
    if not c:
        return c
    scale = _lp_norm(c)
    k = len(c)
    while k > 0 and abs(c[k - 1]) <= rel * scale:
        k -= 1
    del c[k:]
    return c


def _lp_mul(a, b):
    if not a or not b:
        return []
    out = [a[0] * 0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            out[i + j] += ai * bj
    return _lp_strip(out)


def _lp_divmod(a, b):
    """Synthetic division a = q*b + r with deg r < deg b (b nonzero)."""
    if len(a) < len(b):
        return [], list(a)
    r = list(a)
    lb = len(b)
    q = [a[0] * 0] * (len(a) - lb + 1)
    for k in range(len(a) - lb, -1, -1):
        coef = r[k + lb - 1] / b[-1]
        q[k] = coef
        if coef != 0:
            for i in range(lb):
                r[k + i] -= coef * b[i]
    return _lp_strip(q), _lp_strip(r[:lb - 1])


def _smith_reduce(N, m, l, tol, precise):
    """Reduce a polynomial matrix to Smith form by elementary operations.

    Returns (S, V1, V2, det1, det2) with V1 N V2 = S, S diagonal, all entries
    as Polynomial.  The elementary operations are row/column swaps, addition
    of a polynomial multiple of one row/column to another, and constant
    rescaling; det1/det2 track the (constant) determinants of V1/V2 exactly
    through all three.  The working submatrix is rebalanced to unit scale
    before every pivot pass so cancellation thresholds stay anchored to the
    data scale, and pivot rows are rescaled monic so quotient coefficients
    stay bounded when small remainders take over as pivots.
    """
    if precise:
        with mpmath.workdps(_MP_DPS):
            return _smith_reduce_impl(N, m, l, tol, precise)
    return _smith_reduce_impl(N, m, l, tol, precise)


def _smith_reduce_impl(N, m, l, tol, precise):
    any_complex = any(np.iscomplexobj(N[i][j].coeffs) for i in range(m) for j in range(l))
    if precise:
        conv = (lambda v: mpmath.mpc(complex(v))) if any_complex \
            else (lambda v: mpmath.mpf(float(v)))
        back = complex if any_complex else float
    else:
        conv = complex if any_complex else float
        back = conv

    A = [[[conv(v) for v in N[i][j].coeffs] for j in range(l)] for i in range(m)]
    V1 = [[[conv(1.0)] if i == j else [] for j in range(m)] for i in range(m)]
    V2 = [[[conv(1.0)] if i == j else [] for j in range(l)] for i in range(l)]
    det1 = conv(1.0)
    det2 = conv(1.0)
    # Per-coefficient trimming models the data's own noise floor; skip it in
    # the high-precision retry, where only decision tolerances matter.
    coeff_trim = None if precise else TRIM_TOL

    def submul(a, q, b, degree_decide):
        # a - q*b with trim and cancellation decisions
        prod = _lp_mul(q, b)
        scale = max(_lp_norm(a), _lp_norm(prod))
        n = max(len(a), len(prod))
        out = [(a[i] if i < len(a) else 0) - (prod[i] if i < len(prod) else 0)
               for i in range(n)]
        _lp_strip(out)
        if not out or scale == 0:
            return out
        if coeff_trim is not None:
            out = _lp_strip([x if abs(x) > coeff_trim * scale else x * 0 for x in out])
        if _lp_norm(out) <= tol * scale:
            return []
        if degree_decide:
            _lp_degree_trim(out, tol)
        return out

    def row_op(i, t, q):
        for j in range(l):
            A[i][j] = submul(A[i][j], q, A[t][j], True)
        for j in range(m):
            V1[i][j] = submul(V1[i][j], q, V1[t][j], False)

    def col_op(j, t, q):
        for i in range(m):
            A[i][j] = submul(A[i][j], q, A[i][t], True)
        for i in range(l):
            V2[i][j] = submul(V2[i][j], q, V2[i][t], False)

    def scale_row(i, s):
        nonlocal det1
        for j in range(l):
            A[i][j] = [x * s for x in A[i][j]]
        for j in range(m):
            V1[i][j] = [x * s for x in V1[i][j]]
        det1 *= s

    def scale_col(j, s):
        nonlocal det2
        for i in range(m):
            A[i][j] = [x * s for x in A[i][j]]
        for i in range(l):
            V2[i][j] = [x * s for x in V2[i][j]]
        det2 *= s

    def rebalance(t):
        for i in range(t, m):
            s = max((_lp_norm(A[i][j]) for j in range(t, l)), default=0.0)
            if s > 0 and not (0.0625 < s < 16.0):
                scale_row(i, 1.0 / s)
        for j in range(t, l):
            s = max((_lp_norm(A[i][j]) for i in range(t, m)), default=0.0)
            if s > 0 and not (0.0625 < s < 16.0):
                scale_col(j, 1.0 / s)

    def select_pivot(t):
        # Lowest degree wins; ties break on largest leading-coefficient size.
        best = None
        for i in range(t, m):
            for j in range(t, l):
                e = A[i][j]
                if not e:
                    continue
                key = (len(e), -abs(e[-1]))
                if best is None or key < best[0]:
                    best = (key, (i, j))
        return None if best is None else best[1]

    guard = 0
    guard_cap = 400 * (m + l) * (1 + max(
        (N[i][j].degree for i in range(m) for j in range(l)), default=0))
    t = 0
    while t < min(m, l):
        while True:
            guard += 1
            if guard > guard_cap:
                raise NumericalError(
                    f"smith_mcmillan: pivoting stalled at position ({t}, {t}); "
                    "tolerance breakdown during reduction"
                )
            rebalance(t)
            pivot_pos = select_pivot(t)
            if pivot_pos is None:
                t = min(m, l)  # remaining submatrix is zero
                break
            pi, pj = pivot_pos
            if pi != t:
                A[t], A[pi] = A[pi], A[t]
                V1[t], V1[pi] = V1[pi], V1[t]
                det1 = -det1
            if pj != t:
                for row in A:
                    row[t], row[pj] = row[pj], row[t]
                for row in V2:
                    row[t], row[pj] = row[pj], row[t]
                det2 = -det2
            scale_row(t, 1.0 / A[t][t][-1])
            pivot = A[t][t]
            if _lp_norm(pivot) > 1e10:
                raise NumericalError(
                    f"smith_mcmillan: pivot polynomial at ({t}, {t}) is severely "
                    "unbalanced after monic scaling; tolerance breakdown"
                )
            cleared = True
            for i in range(t + 1, m):
                if not A[i][t]:
                    continue
                q, _ = _lp_divmod(A[i][t], pivot)
                row_op(i, t, q)
                if A[i][t]:
                    cleared = False
            for j in range(t + 1, l):
                if not A[t][j]:
                    continue
                q, _ = _lp_divmod(A[t][j], pivot)
                col_op(j, t, q)
                if A[t][j]:
                    cleared = False
            if not cleared:
                continue
            # Divisibility fix-up: the pivot must divide the whole trailing block.
            offender = None
            for i in range(t + 1, m):
                for j in range(t + 1, l):
                    if not A[i][j]:
                        continue
                    _, r = _lp_divmod(A[i][j], pivot)
                    if _lp_norm(r) > tol * max(_lp_norm(A[i][j]), 1.0):
                        offender = i
                        break
                if offender is not None:
                    break
            if offender is None:
                break
            # Fold the offending row into the pivot row and keep reducing.
            minus_one = [conv(-1.0)]
            for j in range(l):
                A[t][j] = submul(A[t][j], minus_one, A[offender][j], True)
            for j in range(m):
                V1[t][j] = submul(V1[t][j], minus_one, V1[offender][j], False)
        t += 1

    def to_poly_mat(M):
        return [[Polynomial([back(x) for x in e]) for e in row] for row in M]

    if any_complex:
        d1, d2 = complex(det1), complex(det2)
    else:
        d1, d2 = float(det1), float(det2)
    return to_poly_mat(A), to_poly_mat(V1), to_poly_mat(V2), d1, d2


def _rel_small(r, reference, tol):
    return r.norm_inf() <= tol * max(reference.norm_inf(), 1.0)


def smith_mcmillan(H, tol=GCD_TOL, verify=True):
    """Smith-McMillan form of a rational matrix.

    Clears H to a polynomial matrix over the monic least common denominator,
    reduces that matrix to Smith form with elementary row/column operations
    (swap and add-polynomial-multiple; no rescaling, so the transform
    determinants stay exactly +-1), divides the denominator back in, and
    cancels common factors.  Diagonal gains g_i carry the entries' leading
    coefficients.

    Raises NumericalError on pivot breakdown or when the self-check
    V1 H V2 = M fails on a unit-circle sample grid.
    """
    if not isinstance(H, RationalMatrix):
        H = RationalMatrix(H)
    m, l = H.shape

    den = Polynomial.one()
    for i in range(m):
        for j in range(l):
            entry = H[i, j]
            if not entry.is_zero:
                den = poly_lcm(den, entry.den, tol)
    if den.degree > DEGREE_CAP:
        raise ValidationError("common denominator degree exceeds cap")

    N = [[Polynomial.zero() for _ in range(l)] for _ in range(m)]
    for i in range(m):
        for j in range(l):
            entry = H[i, j]
            if entry.is_zero:
                continue
            quo, rem = poly_divmod(den, entry.den)
            if not _rel_small(rem, den, 1e-6):
                raise NumericalError(
                    "smith_mcmillan: common denominator is not divisible "
                    f"by the denominator of entry ({i}, {j})"
                )
            N[i][j] = entry.gain * (entry.num * quo)

    last_exc = None
    for precise in (False, True):
        try:
            smf = _assemble_smf(H, N, den, m, l, tol, precise)
            if verify:
                _verify_smf(H, smf)
            return smf
        except NumericalError as exc:
            last_exc = exc
    raise last_exc


def _assemble_smf(H, N, den, m, l, tol, precise):
    S, V1, V2, det1, det2 = _smith_reduce(N, m, l, tol, precise)

    rank = 0
    while rank < min(m, l) and not S[rank][rank].is_zero:
        rank += 1
    if rank == 0:
        raise ValidationError("smith_mcmillan: zero transfer matrix has no form")

    # Fold the accumulated transform determinants back onto the last diagonal
    # entry; afterwards det(V1) det(V2) = 1, so the diagonal gains multiply to
    # the true determinant gain of H and the computational cepstrum offset
    # log(|c_V1|^2 |c_V2|^2) vanishes for square full-rank systems.
    sigma = 1.0 / (det1 * det2)
    for j in range(l):
        S[rank - 1][j] = sigma * S[rank - 1][j]
    for j in range(m):
        V1[rank - 1][j] = sigma * V1[rank - 1][j]
    det1 *= sigma

    diag = []
    for t in range(rank):
        s_t, e_monic = S[t][t].monic()
        if abs(np.imag(s_t)) > 1e-9 * abs(s_t):
            raise NumericalError("smith_mcmillan: complex diagonal gain for real input")
        common = poly_gcd(e_monic, den, tol) if e_monic.degree > 0 else Polynomial.one()
        b_t = poly_divmod(e_monic, common)[0].monic()[1] if common.degree > 0 else e_monic
        a_t = poly_divmod(den, common)[0].monic()[1] if common.degree > 0 else den
        diag.append(RationalFunction(b_t, a_t, gain=float(np.real(s_t)), reduce=False))

    # Reciprocal balancing: scaling row i of V1 by s and column i of V2 by
    # 1/s leaves M = V1 H V2 unchanged; equalizing the paired norms keeps the
    # delivered float64 transforms as well conditioned as this decomposition
    # allows.
    for i in range(min(m, l)):
        rn = max((p.norm_inf() for p in V1[i]), default=0.0)
        cn = max((V2[r][i].norm_inf() for r in range(l)), default=0.0)
        if rn > 0 and cn > 0:
            s = np.sqrt(cn / rn)
            if not (0.5 < s < 2.0):
                for j in range(m):
                    V1[i][j] = s * V1[i][j]
                for r in range(l):
                    V2[r][i] = (1.0 / s) * V2[r][i]
                det1 *= s
                det2 /= s

    _normalize_chain(diag, tol)
    return SmithMcMillanForm(
        diag, PolynomialMatrix(V1), PolynomialMatrix(V2),
        left_det_const=1.0 / det1,
        right_det_const=1.0 / det2,
        shape=(m, l),
    )


def _normalize_chain(diag, tol):
    """Check the divisibility chain a_{i+1} | a_i and b_i | b_{i+1}."""
    for i in range(len(diag) - 1):
        _, ra = poly_divmod(diag[i].den, diag[i + 1].den)
        _, rb = poly_divmod(diag[i + 1].num, diag[i].num)
        if not (_rel_small(ra, diag[i].den, 1e-6) and _rel_small(rb, diag[i + 1].num, 1e-6)):
            raise NumericalError(
                "smith_mcmillan: divisibility chain violated beyond tolerance "
                f"between diagonal entries {i} and {i + 1}"
            )


def _verify_smf(H, smf, n_points=8, rel_tol=1e-6):
    rng = np.random.default_rng(12345)
    zs = np.exp(1j * rng.uniform(0.0, 2 * np.pi, size=n_points))
    eps = np.finfo(float).eps
    for z in zs:
        v1z = smf.left.eval(z)
        v2z = smf.right.eval(z)
        hz = H.eval(z)
        lhs = v1z @ hz @ v2z
        rhs = smf.pseudo_diagonal(z)
        scale = max(np.linalg.norm(rhs), 1.0)
        if np.linalg.norm(lhs - rhs) > rel_tol * scale:
            # The float64 residual is an unreliable witness when the transform
            # coefficients are large; judge the true residual of the delivered
            # transforms (computed in extended precision) against what float64
            # coefficients can represent at all.
            err = _mp_residual(H, smf, z)
            representable = 64.0 * eps * np.linalg.norm(v1z) * \
                max(np.linalg.norm(hz), 1.0) * np.linalg.norm(v2z)
            if err > max(rel_tol * scale, representable):
                raise NumericalError(
                    "smith_mcmillan: reconstruction check V1 H V2 = M failed "
                    f"at z = {z:.4f} (relative error {err / scale:.2e})"
                )


def _mp_polyval(p, z):
    acc = mpmath.mpc(0)
    for c in reversed(p.coeffs):
        acc = acc * z + mpmath.mpc(complex(c))
    return acc


def _mp_residual(H, smf, z_point):
    with mpmath.workdps(_MP_DPS):
        z = mpmath.mpc(complex(z_point))
        m, l = smf.shape

        def mat_of(pm, rows, cols):
            return mpmath.matrix(
                [[_mp_polyval(pm[i, j], z) for j in range(cols)] for i in range(rows)]
            )

        V1z = mat_of(smf.left, m, m)
        V2z = mat_of(smf.right, l, l)
        Hz = mpmath.matrix(m, l)
        for i in range(m):
            for j in range(l):
                entry = H[i, j]
                if entry.is_zero:
                    continue
                Hz[i, j] = entry.gain * _mp_polyval(entry.num, z) / _mp_polyval(entry.den, z)
        Mz = mpmath.matrix(m, l)
        for i, entry in enumerate(smf.diag):
            Mz[i, i] = entry.gain * _mp_polyval(entry.num, z) / _mp_polyval(entry.den, z)
        R = V1z * Hz * V2z - Mz
        err = mpmath.mpf(0)
        for i in range(m):
            for j in range(l):
                err += abs(R[i, j]) ** 2
        return float(mpmath.sqrt(err))


def pole_zero_polynomials(smf):
    """Zero polynomial, pole polynomial and total gain from a Smith-McMillan form.

    b(z) is the product of the diagonal numerators, a(z) of the denominators,
    and g the product of the diagonal gains.
    """
    b = Polynomial.one()
    a = Polynomial.one()
    g = 1.0
    for entry in smf.diag:
        b = b * entry.num
        a = a * entry.den
        g *= entry.gain
    return b, a, g
