"""Dense complex linear-algebra and transform kernels.

Thin, contract-checked wrappers around LAPACK (via numpy) plus the
two-sided DFT used by the range-Doppler processor.  Everything here is
pure and reentrant; all matrices are complex128 ndarrays.

Conventions:
  * eigenvalues / singular values are always returned in descending order;
  * Hermitian symmetry is checked to a relative tolerance of 1e-10;
  * a near-singular positive-definite input gets one jitter retry before
    failing (see ``cholesky``).
"""

import numpy as np
from scipy.linalg import solve_triangular

from .errors import ContractViolationError, DecompositionError

HERMITIAN_RTOL = 1e-10
PD_JITTER = 1e-12


def _as_complex_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a.view(np.float64))):
        raise ContractViolationError(f"{name} contains NaN or Inf entries")
    return a


def _check_hermitian(a, name="matrix"):
    scale = np.linalg.norm(a)
    dev = np.linalg.norm(a - a.conj().T)
    if dev > HERMITIAN_RTOL * max(scale, 1e-300):
        raise ContractViolationError(
            f"{name} is not Hermitian (relative asymmetry {dev / max(scale, 1e-300):.2e})"
        )
    return 0.5 * (a + a.conj().T)


def _first_bad_pivot(a):
    """Index of the first failing pivot of an attempted Cholesky, for diagnostics."""
    n = a.shape[0]
    l = np.zeros_like(a)
    for j in range(n):
        s = a[j, j] - np.vdot(l[j, :j], l[j, :j])
        if s.real <= 0.0:
            return j
        l[j, j] = np.sqrt(s.real)
        if j + 1 < n:
            l[j + 1:, j] = (a[j + 1:, j] - l[j + 1:, :j] @ l[j, :j].conj()) / l[j, j]
    return None


def cholesky(a):
    """Lower-triangular L with L L^H = a for Hermitian positive-definite a.

    If the factorization fails on the first attempt, a jitter of
    ``PD_JITTER * trace(a)/n`` is added to the diagonal and the
    factorization is retried once; whitening matrices built from analog
    combiners can be numerically on the PD boundary.
    """
    a = _as_complex_matrix(a)
    a = _check_hermitian(a)
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        pass
    n = a.shape[0]
    jitter = PD_JITTER * max(np.trace(a).real, 0.0) / n
    try:
        return np.linalg.cholesky(a + jitter * np.eye(n))
    except np.linalg.LinAlgError:
        pivot = _first_bad_pivot(a)
        raise DecompositionError(
            f"matrix not positive definite (first failing pivot {pivot})", pivot=pivot
        )


def hermitian_eig(a):
    """Eigendecomposition of a Hermitian matrix.

    Returns ``(w, v)`` with real eigenvalues ``w`` sorted descending and
    orthonormal eigenvector columns ``v`` in matching order.
    """
    a = _as_complex_matrix(a)
    a = _check_hermitian(a)
    w, v = np.linalg.eigh(a)
    return w[::-1].copy(), v[:, ::-1].copy()


def generalized_hermitian_eig(a, b):
    """Solve a v = lambda b v for Hermitian PSD a and Hermitian PD b.

    Implemented by whitening: with b = L L^H, the standard problem
    L^-1 a L^-H u = lambda u is solved and v = L^-H u is mapped back.
    Eigenvalues come out descending; eigenvectors are scaled to unit
    Euclidean norm.

    Both operands are normalized to unit Frobenius norm internally (the
    eigenvectors are scale-invariant, the eigenvalues rescale); physical
    covariance scales around 1e-13 W otherwise push the triangular solves
    into subnormal arithmetic.
    """
    a = _as_complex_matrix(a, "numerator")
    b = _as_complex_matrix(b, "denominator")
    scale_a = np.linalg.norm(a)
    scale_b = np.linalg.norm(b)
    if scale_b == 0.0:
        raise DecompositionError("denominator is identically zero")
    an = a / scale_a if scale_a > 0 else a
    bn = b / scale_b
    l = cholesky(bn)
    la = solve_triangular(l, an, lower=True, check_finite=False)
    c = solve_triangular(l, la.conj().T, lower=True, check_finite=False).conj().T
    w, u = hermitian_eig(c)
    v = solve_triangular(l.conj().T, u, lower=False, check_finite=False)
    v = v / np.linalg.norm(v, axis=0, keepdims=True)
    return w * (scale_a / scale_b), v


def svd(a):
    """SVD a = U diag(s) V^H with singular values descending.

    Returns ``(u, s, v)`` where ``v`` holds the right singular vectors as
    columns (not the conjugate transpose).
    """
    a = _as_complex_matrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    return u, s, vh.conj().T


def dft_2d(x, len0, len1):
    """Two-sided transform locating the phase ramps of a radar image.

    ``out[p, q] = sum_{m,n} x[m, n] exp(+j 2 pi m p / len0) exp(-j 2 pi n q / len1)``

    i.e. an (unnormalized) inverse-DFT kernel down axis 0 and a forward-DFT
    kernel along axis 1, with zero padding up to (len0, len1).  A tone
    ``x[m, n] = exp(-j 2 pi m p0 / len0) exp(+j 2 pi n q0 / len1)`` produces
    its magnitude peak exactly at ``(p0, q0)``.  No 1/N scaling is applied
    on either axis; scaling is irrelevant for peak localization.
    """
    x = _as_complex_matrix(x, "image")
    m, n = x.shape
    if len0 < m or len1 < n:
        raise ContractViolationError(
            f"transform lengths ({len0}, {len1}) smaller than data {x.shape}"
        )
    out = np.fft.ifft(x, n=len0, axis=0) * len0
    out = np.fft.fft(out, n=len1, axis=1)
    return out
