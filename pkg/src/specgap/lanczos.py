"""Lowest eigenpairs of large Hermitian operators.

Lanczos iteration with full reorthogonalization, explicit restarts and
locking of converged Ritz pairs.  Locked vectors are projected out of every
later Krylov space, so each copy of a degenerate eigenvalue is picked up by a
separate restart.  A final verification cycle started from a fresh random
vector checks that nothing below the locked set was missed.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import ConvergenceError, DomainError

# cap on the Krylov basis, in bytes, so that 3^12-dimensional runs fit in memory
_BASIS_BYTES = 1 << 30


def _orthogonalize(w, blocks):
    # two passes of classical Gram-Schmidt ("twice is enough")
    for _ in range(2):
        for Q in blocks:
            if Q.shape[1]:
                w -= Q @ (Q.conj().T @ w)
    return w


def _random_vector(rng, n, dtype):
    v = rng.standard_normal(n)
    if np.issubdtype(dtype, np.complexfloating):
        v = v + 1j * rng.standard_normal(n)
    return v.astype(dtype)


def _krylov_cycle(matvec, v, m, locked, dtype):
    """Run up to ``m`` Lanczos steps from ``v``; return basis, alpha, beta, breakdown."""
    n = v.shape[0]
    V = np.empty((n, m), dtype=dtype)
    alpha = np.zeros(m)
    beta = np.zeros(m)
    v = _orthogonalize(v, [locked])
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return V[:, :0], alpha[:0], beta[:0], True
    v = v / nv
    steps = 0
    breakdown = False
    for j in range(m):
        V[:, j] = v
        w = matvec(v)
        a = float(np.real(np.vdot(v, w)))
        alpha[j] = a
        w = w - a * v
        if j > 0:
            w = w - beta[j - 1] * V[:, j - 1]
        w = _orthogonalize(w, [V[:, : j + 1], locked])
        b = float(np.linalg.norm(w))
        beta[j] = b
        steps = j + 1
        scale = max(1.0, abs(a), beta[j - 1] if j > 0 else 0.0)
        if b <= 1e-13 * scale:
            breakdown = True
            break
        v = w / b
    return V[:, :steps], alpha[:steps], beta[:steps], breakdown


def lanczos_lowest(matvec, n, k, *, tol=1e-10, krylov_dim=None,
                   max_restarts=None, seed=0, dtype=np.float64):
    """Lowest ``k`` eigenpairs of a Hermitian operator given by ``matvec``.

    Parameters
    ----------
    matvec : callable
        ``x -> A @ x`` for a Hermitian ``A`` of size ``n``.
    n, k : int
        Operator dimension and number of wanted eigenpairs (``k <= n``).
    tol : float
        Residual tolerance relative to ``max(1, |theta|_max)``.
    krylov_dim : int, optional
        Lanczos steps per restart cycle.
    max_restarts : int, optional
        Maximum number of restart cycles, default ``50 * k``.
    seed : int
        Seed of the start vectors.  Results are reproducible for a fixed seed.

    Returns
    -------
    values : ndarray, shape (k,)
    vectors : ndarray, shape (n, k)
    residuals : ndarray, shape (k,)
    """
    if k < 1 or k > n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    dtype = np.dtype(dtype)
    rng = np.random.default_rng(seed)
    if krylov_dim is None:
        krylov_dim = max(3 * k, 60)
    itemsize = dtype.itemsize
    krylov_dim = int(max(2, min(krylov_dim, _BASIS_BYTES // max(1, n * itemsize))))
    if max_restarts is None:
        max_restarts = 50 * k

    locked = np.empty((n, 0), dtype=dtype)
    locked_vals = []
    locked_res = []
    scale = 1.0
    v = _random_vector(rng, n, dtype)
    best_vals = np.array([])
    best_res = np.array([])
    verifying = False

    for _cycle in range(max_restarts):
        m = min(krylov_dim, n - locked.shape[1])
        if m <= 0:
            break
        V, alpha, beta, breakdown = _krylov_cycle(matvec, v, m, locked, dtype)
        if V.shape[1] == 0:
            v = _random_vector(rng, n, dtype)
            continue
        T = np.diag(alpha)
        if len(alpha) > 1:
            T += np.diag(beta[:-1], 1) + np.diag(beta[:-1], -1)
        theta, S = scipy.linalg.eigh(T)
        scale = max(scale, float(np.max(np.abs(theta))))
        thresh = tol * scale
        need = k - len(locked_vals) if not verifying else 1
        X = V @ S[:, : max(need, 1)]
        res = np.empty(X.shape[1])
        for i in range(X.shape[1]):
            r = matvec(X[:, i]) - theta[i] * X[:, i]
            res[i] = np.linalg.norm(r)
        best_vals, best_res = theta[: X.shape[1]], res

        if verifying:
            if res[0] > thresh:
                v = X[:, 0].copy()
                continue
            if theta[0] >= max(locked_vals) - thresh:
                break
            # a lower eigenvalue was missed: swap it in for the highest one
            drop = int(np.argmax(locked_vals))
            keep = [i for i in range(len(locked_vals)) if i != drop]
            locked = np.column_stack([locked[:, keep], X[:, 0]])
            locked_vals = [locked_vals[i] for i in keep] + [float(theta[0])]
            locked_res = [locked_res[i] for i in keep] + [float(res[0])]
            v = _random_vector(rng, n, dtype)
            continue

        n_new = 0
        for i in range(X.shape[1]):
            if res[i] <= thresh:
                n_new += 1
            else:
                break
        if n_new:
            locked = np.column_stack([locked, X[:, :n_new]])
            locked_vals.extend(float(t) for t in theta[:n_new])
            locked_res.extend(float(r) for r in res[:n_new])
        if len(locked_vals) >= k:
            verifying = True
            v = _random_vector(rng, n, dtype)
            if locked.shape[1] >= n:
                break
            continue
        if n_new:
            # fresh random start so remaining copies of a degenerate level are visible
            v = _random_vector(rng, n, dtype)
        else:
            v = X[:, : max(1, need)].sum(axis=1)
    else:
        vals = np.array(locked_vals + list(best_vals))
        resid = np.array(locked_res + list(best_res))
        raise ConvergenceError(
            f"Lanczos did not converge within {max_restarts} restarts "
            f"({len(locked_vals)} of {k} pairs locked)",
            eigenvalues=vals,
            residuals=resid,
        )

    order = np.argsort(locked_vals)[:k]
    values = np.asarray(locked_vals)[order]
    vectors = locked[:, order]
    residuals = np.asarray(locked_res)[order]
    return values, vectors, residuals
