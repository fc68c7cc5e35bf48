"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Each function has the same signature and semantics as its compiled twin;
results agree up to floating-point summation order.
"""
import numpy as np


def _objective(Z, y, theta, alpha):
    r = y - Z @ theta
    return float(np.mean(np.where(r >= 0, alpha * r, (alpha - 1.0) * r)))


def subgradient_pinball(Z, y, alpha, max_iter, step, tol, window):
    """Averaged subgradient descent on the mean pinball loss.

    Parameters
    ----------
    Z : ndarray, shape (n, d)
        Design matrix (already standardized, intercept column included).
    y : ndarray, shape (n,)
    alpha : float
        Quantile level.
    max_iter : int
    step : float
        Step size constant ``c``; iteration ``t`` uses ``c / sqrt(t)``.
    tol : float
        Convergence is declared when the averaged objective improves by less
        than ``tol`` over ``window`` iterations.
    window : int

    Returns
    -------
    theta : ndarray, shape (d,)
        Averaged iterate.
    n_iter : int
    converged : bool
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, d = Z.shape
    theta = np.zeros(d)
    avg = np.zeros(d)
    prev = _objective(Z, y, avg, alpha)
    done = 0
    converged = False
    for t in range(1, max_iter + 1):
        r = y - Z @ theta
        coef = alpha - (r < 0)
        grad = -(Z.T @ coef)
        theta = theta - (step / np.sqrt(t)) * grad / n
        avg += (theta - avg) / t
        done = t
        if t % window == 0:
            obj = _objective(Z, y, avg, alpha)
            if prev - obj < tol:
                converged = True
                break
            prev = obj
    return avg, done, converged


def ks_sorted(a, b):
    """Exact two-sample KS statistic of two ascending samples."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    pts = np.concatenate([a, b])
    fa = np.searchsorted(a, pts, side="right") / a.size
    fb = np.searchsorted(b, pts, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def kernel_smooth(f_ext, v_start, dv, t_grid, h, support, kernel, chunk=64):
    """Normalized Riemann/trapezoid convolution of ``f_ext`` with a kernel.

    ``f_ext[j]`` is the integrand at ``v_start + j * dv``. ``kernel`` is 0 for
    triangular and 1 for gaussian.
    """
    f_ext = np.asarray(f_ext, dtype=np.float64)
    t_grid = np.asarray(t_grid, dtype=np.float64)
    nf = f_ext.size
    out = np.empty(t_grid.size)
    for start in range(0, t_grid.size, chunk):
        t = t_grid[start:start + chunk]
        jlo = max(int(np.ceil((t[0] - support - v_start) / dv)), 0)
        jhi = min(int(np.floor((t[-1] + support - v_start) / dv)), nf - 1)
        v = v_start + np.arange(jlo, jhi + 1) * dv
        u = (t[:, None] - v[None, :]) / h
        if kernel == 0:
            w = np.clip(1.0 - np.abs(u), 0.0, None)
        else:
            w = np.exp(-0.5 * u * u)
            w[np.abs(u) * h > support] = 0.0
        out[start:start + chunk] = (w @ f_ext[jlo:jhi + 1]) / w.sum(axis=1)
    return out
