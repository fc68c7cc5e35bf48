# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`fairconformal._fallback`."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, fabs, ceil, floor

cnp.import_array()


cdef double _objective(const double[:, ::1] Z, const double[::1] y,
                       const double[::1] theta, double alpha) noexcept nogil:
    cdef Py_ssize_t n = Z.shape[0], d = Z.shape[1], i, j
    cdef double r, total = 0.0
    for i in range(n):
        r = y[i]
        for j in range(d):
            r -= Z[i, j] * theta[j]
        if r >= 0:
            total += alpha * r
        else:
            total -= (1.0 - alpha) * r
    return total / n


def subgradient_pinball(Z, y, double alpha, Py_ssize_t max_iter, double step,
                        double tol, Py_ssize_t window):
    cdef const double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = Zv.shape[0], d = Zv.shape[1], i, j, t
    theta_arr = np.zeros(d)
    avg_arr = np.zeros(d)
    grad_arr = np.zeros(d)
    cdef double[::1] theta = theta_arr
    cdef double[::1] avg = avg_arr
    cdef double[::1] grad = grad_arr
    cdef double r, coef, lr
    cdef double prev = _objective(Zv, yv, avg, alpha)
    cdef double obj = prev
    cdef bint converged = False
    cdef Py_ssize_t done = 0
    with nogil:
        for t in range(1, max_iter + 1):
            for j in range(d):
                grad[j] = 0.0
            for i in range(n):
                r = yv[i]
                for j in range(d):
                    r -= Zv[i, j] * theta[j]
                coef = alpha - (1.0 if r < 0 else 0.0)
                for j in range(d):
                    grad[j] -= Zv[i, j] * coef
            lr = step / sqrt(<double>t)
            for j in range(d):
                theta[j] -= lr * grad[j] / n
                avg[j] += (theta[j] - avg[j]) / t
            done = t
            if t % window == 0:
                obj = _objective(Zv, yv, avg, alpha)
                if prev - obj < tol:
                    converged = True
                    break
                prev = obj
    return avg_arr, done, bool(converged)


def ks_sorted(a, b):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t na = av.shape[0], nb = bv.shape[0], i = 0, j = 0
    cdef double x, diff, best = 0.0
    with nogil:
        while i < na and j < nb:
            x = av[i] if av[i] <= bv[j] else bv[j]
            while i < na and av[i] == x:
                i += 1
            while j < nb and bv[j] == x:
                j += 1
            diff = fabs(<double>i / na - <double>j / nb)
            if diff > best:
                best = diff
    return best


def kernel_smooth(f_ext, double v_start, double dv, t_grid, double h,
                  double support, int kernel):
    cdef const double[::1] f = np.ascontiguousarray(f_ext, dtype=np.float64)
    cdef const double[::1] tg = np.ascontiguousarray(t_grid, dtype=np.float64)
    cdef Py_ssize_t m = tg.shape[0], nf = f.shape[0], i, j, jlo, jhi
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    cdef double t, u, w, num, den
    with nogil:
        for i in range(m):
            t = tg[i]
            jlo = <Py_ssize_t>ceil((t - support - v_start) / dv)
            jhi = <Py_ssize_t>floor((t + support - v_start) / dv)
            if jlo < 0:
                jlo = 0
            if jhi > nf - 1:
                jhi = nf - 1
            num = 0.0
            den = 0.0
            for j in range(jlo, jhi + 1):
                u = (t - (v_start + j * dv)) / h
                if kernel == 0:
                    w = 1.0 - fabs(u)
                    if w <= 0:
                        continue
                else:
                    w = exp(-0.5 * u * u)
                num += w * f[j]
                den += w
            out[i] = num / den
    return out_arr
