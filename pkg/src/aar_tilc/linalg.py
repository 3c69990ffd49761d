"""Small dense eigenvalue routines used by the certificates.

The solver is a textbook shifted QR iteration on the Hessenberg form with
Wilkinson shifts and deflation, run in complex arithmetic so that real
matrices with complex-conjugate eigenpairs need no special casing.  It is
meant for the 3x3 and 6x6 matrices that show up here, not for large
problems.
"""
import numpy as np

from .errors import NoConvergence, NotSymmetric


def hessenberg(a):
    """Householder reduction to upper Hessenberg form (similarity transform)."""
    h = np.array(a, dtype=complex)
    n = h.shape[0]
    for k in range(n - 2):
        x = h[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        phase = x[0] / abs(x[0]) if x[0] != 0 else 1.0
        v = x
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        h[k + 1:, :] -= 2.0 * np.outer(v, v.conj() @ h[k + 1:, :])
        h[:, k + 1:] -= 2.0 * np.outer(h[:, k + 1:] @ v, v.conj())
    return h


def _wilkinson_shift(a, b, c, d):
    # eigenvalue of [[a, b], [c, d]] closest to d
    tr = a + d
    det = a * d - b * c
    disc = np.sqrt(tr * tr / 4 - det)
    l1, l2 = tr / 2 + disc, tr / 2 - disc
    return l1 if abs(l1 - d) < abs(l2 - d) else l2


def eigvals_qr(a, tol=1e-14, max_iter=10_000):
    """All eigenvalues of a square matrix via shifted QR with deflation."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    n = a.shape[0]
    if n == 0:
        return np.zeros(0, dtype=complex)
    h = hessenberg(a)
    scale = max(np.abs(h).max(), np.finfo(float).tiny)
    eig = np.zeros(n, dtype=complex)
    hi = n - 1
    it = 0
    since_deflation = 0
    while hi >= 0:
        if hi == 0:
            eig[0] = h[0, 0]
            break
        # look for a negligible subdiagonal entry
        lo = hi
        while lo > 0:
            s = abs(h[lo - 1, lo - 1]) + abs(h[lo, lo])
            if abs(h[lo, lo - 1]) <= tol * (s if s > 0 else scale):
                h[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            eig[hi] = h[hi, hi]
            hi -= 1
            since_deflation = 0
            continue
        it += 1
        since_deflation += 1
        if it > max_iter:
            raise NoConvergence(f"QR iteration did not converge in {max_iter} sweeps")
        if since_deflation % 11 == 0:
            # exceptional shift breaks rare cycles
            mu = h[hi, hi] + abs(h[hi, hi - 1])
        else:
            mu = _wilkinson_shift(h[hi - 1, hi - 1], h[hi - 1, hi], h[hi, hi - 1], h[hi, hi])
        blk = h[lo:hi + 1, lo:hi + 1]
        m = blk.shape[0]
        blk -= mu * np.eye(m)
        # QR by Givens rotations on the Hessenberg block, then RQ
        rots = []
        for k in range(m - 1):
            x, y = blk[k, k], blk[k + 1, k]
            r = np.hypot(abs(x), abs(y))
            if r == 0:
                c, s = 1.0, 0.0
            else:
                c, s = x / r, y / r
            g = np.array([[np.conj(c), np.conj(s)], [-s, c]])
            blk[k:k + 2, k:] = g @ blk[k:k + 2, k:]
            rots.append(g)
        for k, g in enumerate(rots):
            blk[:k + 2, k:k + 2] = blk[:k + 2, k:k + 2] @ g.conj().T
        blk += mu * np.eye(m)
        h[lo:hi + 1, lo:hi + 1] = blk
    return eig


def spectral_radius(a, **kw):
    """Largest eigenvalue modulus, computed with :func:`eigvals_qr`."""
    return float(np.max(np.abs(eigvals_qr(a, **kw))))


def check_symmetric(m, tol=1e-12):
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("square matrix required")
    asym = np.max(np.abs(m - m.T)) if m.size else 0.0
    if asym > tol:
        raise NotSymmetric(f"matrix asymmetry {asym:.3e} exceeds {tol:g}")
    return m


def validate_negative_definite(m, sym_tol=1e-12, eig_tol=1e-12):
    """True iff every eigenvalue of the symmetric matrix ``m`` is below zero.

    An eigenvalue within ``eig_tol * max(1, |m|)`` of zero counts as zero,
    so numerically singular matrices are rejected.
    """
    m = check_symmetric(m, sym_tol)
    lam = eigvals_qr(0.5 * (m + m.T)).real
    cutoff = eig_tol * max(1.0, float(np.abs(m).max()))
    return bool(np.all(lam < -cutoff))


def is_negative_definite_general(m, eig_tol=1e-12):
    """x' M x < 0 for all x != 0, for possibly non-symmetric ``m``."""
    m = np.asarray(m, dtype=float)
    sym = 0.5 * (m + m.T)
    lam = eigvals_qr(sym).real
    cutoff = eig_tol * max(1.0, float(np.abs(m).max()))
    return bool(np.all(lam < -cutoff))
