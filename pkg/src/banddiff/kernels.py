"""Hot loops, each with a compiled and a numpy implementation.

The public names dispatch on :data:`banddiff._accel.HAVE_NUMBA`. The
``*_numpy`` twins are always importable so tests and the benchmark can
compare both paths in one process.
"""
import numpy as np

from ._accel import HAVE_NUMBA, njit


# -- band matrix-vector product ---------------------------------------------

@njit
def _band_matvec_loop(table, nb, v, out):
    n, m = nb.shape
    for x in range(n):
        acc = 0j
        for j in range(m):
            acc += table[x, j] * v[nb[x, j]]
        out[x] = acc
    return out


def band_matvec_numpy(table, nb, v):
    return np.einsum("ij,ij->i", table, v[nb])


def band_matvec(table, nb, v):
    """(Hv)_x = sum_j table[x, j] v[nb[x, j]]; ``table[x, j] = H[x, x + u_j]``."""
    if HAVE_NUMBA:
        out = np.empty(nb.shape[0], dtype=np.complex128)
        return _band_matvec_loop(table, nb, np.ascontiguousarray(v, dtype=np.complex128), out)
    return band_matvec_numpy(table, nb, v.astype(np.complex128, copy=False))


# -- shell convolution (walk counting) --------------------------------------

@njit
def _shell_convolve_loop(p, nb, out):
    n, m = nb.shape
    for x in range(n):
        acc = p[nb[x, 0]] * 0
        for j in range(m):
            acc += p[nb[x, j]]
        out[x] = acc
    return out


def shell_convolve_numpy(p, nb):
    return p[nb].sum(axis=1)


def shell_convolve(p, nb):
    """q(x) = sum over shell offsets u of p(x + u); the shell is symmetric.

    Object arrays (exact big integers) always take the numpy path.
    """
    if HAVE_NUMBA and p.dtype != object:
        return _shell_convolve_loop(p, nb, np.empty_like(p))
    return shell_convolve_numpy(p, nb)


# -- subexponential localisation search -------------------------------------

@njit
def _subexp_loop(weights, order, diff_index, expo, log_k):
    """For each column a, search for a centre u with sum_x w[x] exp(e(x - u)) <= K.

    Terms are accumulated heaviest-first in log space so a centre is rejected
    as soon as the partial sum passes K; nothing overflows. Returns the first
    accepted centre index per column or -1.
    """
    n, ncol = weights.shape
    found = np.full(ncol, -1, dtype=np.int64)
    k_val = np.exp(log_k)
    for a in range(ncol):
        start = order[0, a]
        for s in range(n):
            # try the heaviest site first, then the rest in index order
            if s == 0:
                u = start
            elif s <= start:
                u = s - 1
            else:
                u = s
            acc = 0.0
            ok = True
            for r in range(n):
                x = order[r, a]
                w = weights[x, a]
                if w <= 0.0:
                    continue
                lt = np.log(w) + expo[diff_index[x, u]]
                if lt > log_k:
                    ok = False
                    break
                acc += np.exp(lt)
                if acc > k_val:
                    ok = False
                    break
            if ok:
                found[a] = u
                break
    return found


def subexp_search_numpy(weights, order, diff_index, expo, log_k):
    n, ncol = weights.shape
    found = np.full(ncol, -1, dtype=np.int64)
    with np.errstate(divide="ignore"):
        logw = np.log(weights)
    for a in range(ncol):
        lw = logw[:, a]
        live = np.isfinite(lw)
        # terms[u, x] = log w[x] + e(x - u)
        terms = lw[live][None, :] + expo[diff_index[live, :]].T
        top = terms.max(axis=1)
        with np.errstate(over="ignore"):
            logs = top + np.log(np.exp(terms - top[:, None]).sum(axis=1))
        hit = np.flatnonzero(logs <= log_k)
        if hit.size:
            start = order[0, a]
            found[a] = start if start in hit else hit[0]
    return found


def subexp_search(weights, order, diff_index, expo, log_k):
    if HAVE_NUMBA:
        return _subexp_loop(weights, order, diff_index, expo, log_k)
    return subexp_search_numpy(weights, order, diff_index, expo, log_k)
