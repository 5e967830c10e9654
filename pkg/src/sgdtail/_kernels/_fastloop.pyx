# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-loop kernels.

Mirrors sgdtail._kernels.pyloop operation for operation: same accumulation
order, same branchwise sigmoid/softplus, libm exp/log1p.  Compiled with
-ffp-contract=off so results are bit-identical to the pure-Python backend.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log1p, isfinite, NAN

NCX_OK = 0
NCX_NONFINITE = 1


cdef inline double _soft(double u, double thr) nogil:
    if u > thr:
        return u - thr
    if u < -thr:
        return u + thr
    return 0.0


cdef void _ncx_full_eval(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                         const double[::1] data, Py_ssize_t n, Py_ssize_t d, double lam,
                         const double[::1] xs, double[::1] g,
                         double* out_loss, double* out_rhat) nogil:
    cdef Py_ssize_t r, j
    cdef cnp.int64_t p
    cdef double z, e, s, sp, coef, acc_loss, inv_n, two_lam, acc_pen, rhat, u, sq, w, gj
    for j in range(d):
        g[j] = 0.0
    acc_loss = 0.0
    for r in range(n):
        z = 0.0
        for p in range(indptr[r], indptr[r + 1]):
            z += data[p] * xs[indices[p]]
        if z >= 0.0:
            e = exp(-z)
            s = e / (1.0 + e)
            sp = log1p(e)
        else:
            e = exp(z)
            s = 1.0 / (1.0 + e)
            sp = -z + log1p(e)
        acc_loss += sp
        coef = -s
        for p in range(indptr[r], indptr[r + 1]):
            g[indices[p]] += coef * data[p]
    inv_n = 1.0 / n
    two_lam = 2.0 * lam
    acc_pen = 0.0
    rhat = 0.0
    for j in range(d):
        u = xs[j]
        sq = u * u
        acc_pen += sq / (1.0 + sq)
        w = 1.0 + sq
        gj = g[j] * inv_n + two_lam * u / (w * w)
        g[j] = gj
        rhat += gj * gj
    out_loss[0] = acc_loss * inv_n + lam * acc_pen
    out_rhat[0] = rhat


cdef double _prox_residual_sq(const double[::1] xs, const double[::1] g, Py_ssize_t d,
                              double gamma, double tau) nogil:
    cdef Py_ssize_t j
    cdef double thr = gamma * tau
    cdef double acc = 0.0
    cdef double u, v, q
    for j in range(d):
        u = xs[j] - gamma * g[j]
        v = _soft(u, thr)
        q = (xs[j] - v) / gamma
        acc += q * q
    return acc


def eval_ncx(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices, double[::1] data,
             Py_ssize_t d, double lam, double[::1] x, double prox_tau, double gamma):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef double[::1] g = np.zeros(d)
    cdef double loss = 0.0, rhat = 0.0
    with nogil:
        _ncx_full_eval(indptr, indices, data, n, d, lam, x, g, &loss, &rhat)
        if prox_tau >= 0.0:
            rhat = _prox_residual_sq(x, g, d, gamma, prox_tau)
    return loss, rhat


def run_ncx_segment(cnp.int64_t[::1] indptr, cnp.int64_t[::1] indices, double[::1] data,
                    Py_ssize_t d, double lam, double[::1] x, bint full_batch,
                    cnp.int64_t[::1] idx, cnp.int64_t[::1] idx_off, double[::1] gammas,
                    cnp.uint8_t[::1] log_flags, bint want_mb, double prox_tau,
                    cnp.int64_t t0,
                    cnp.int64_t[::1] out_t, double[::1] out_rhat, double[::1] out_loss,
                    double[::1] out_mb, double[::1] out_gamma):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t steps = gammas.shape[0]
    cdef double[::1] g = np.zeros(d)
    cdef Py_ssize_t n_logged = 0
    cdef int status = NCX_OK
    cdef Py_ssize_t s_i, j, k, lo, hi, b, r
    cdef cnp.int64_t p
    cdef double gamma, loss_v = 0.0, rhat = 0.0, acc_mb, z, e, s, sp, coef
    cdef double inv_b, u, w, gj, thr, mb, acc_pen, sq
    cdef bint do_log
    with nogil:
        for s_i in range(steps):
            gamma = gammas[s_i]
            do_log = log_flags[s_i] != 0
            if do_log:
                _ncx_full_eval(indptr, indices, data, n, d, lam, x, g, &loss_v, &rhat)
                if prox_tau >= 0.0:
                    rhat = _prox_residual_sq(x, g, d, gamma, prox_tau)
                if not (isfinite(loss_v) and isfinite(rhat)):
                    status = NCX_NONFINITE
                    break
            for j in range(d):
                g[j] = 0.0
            acc_mb = 0.0
            if full_batch:
                lo = 0
                hi = n
            else:
                lo = idx_off[s_i]
                hi = idx_off[s_i + 1]
            b = hi - lo
            for k in range(lo, hi):
                r = k if full_batch else idx[k]
                z = 0.0
                for p in range(indptr[r], indptr[r + 1]):
                    z += data[p] * x[indices[p]]
                if z >= 0.0:
                    e = exp(-z)
                    s = e / (1.0 + e)
                    sp = log1p(e)
                else:
                    e = exp(z)
                    s = 1.0 / (1.0 + e)
                    sp = -z + log1p(e)
                acc_mb += sp
                coef = -s
                for p in range(indptr[r], indptr[r + 1]):
                    g[indices[p]] += coef * data[p]
            if do_log:
                if want_mb:
                    acc_pen = 0.0
                    for j in range(d):
                        sq = x[j] * x[j]
                        acc_pen += sq / (1.0 + sq)
                    mb = acc_mb * (1.0 / b) + lam * acc_pen
                else:
                    mb = NAN
                out_t[n_logged] = t0 + s_i
                out_rhat[n_logged] = rhat
                out_loss[n_logged] = loss_v
                out_mb[n_logged] = mb
                out_gamma[n_logged] = gamma
                n_logged += 1
            inv_b = 1.0 / b
            if prox_tau < 0.0:
                for j in range(d):
                    u = x[j]
                    w = 1.0 + u * u
                    gj = g[j] * inv_b + (2.0 * lam) * u / (w * w)
                    x[j] = u - gamma * gj
            else:
                thr = gamma * prox_tau
                for j in range(d):
                    u = x[j]
                    w = 1.0 + u * u
                    gj = g[j] * inv_b + (2.0 * lam) * u / (w * w)
                    x[j] = _soft(u - gamma * gj, thr)
    return n_logged, status


cdef void _quad_full_eval(double c, Py_ssize_t d, const double[::1] xs,
                          double* out_loss, double* out_rhat) nogil:
    cdef Py_ssize_t j
    cdef double acc = 0.0, rhat = 0.0, u, gj
    for j in range(d):
        u = xs[j]
        acc += u * u
        gj = c * u
        rhat += gj * gj
    out_loss[0] = 0.5 * c * acc
    out_rhat[0] = rhat


def eval_quad(double c, Py_ssize_t d, double[::1] x, double prox_tau, double gamma):
    cdef double loss = 0.0, rhat = 0.0
    cdef double thr, acc, u, v, q
    cdef Py_ssize_t j
    with nogil:
        _quad_full_eval(c, d, x, &loss, &rhat)
        if prox_tau >= 0.0:
            thr = gamma * prox_tau
            acc = 0.0
            for j in range(d):
                u = x[j] - gamma * (c * x[j])
                v = _soft(u, thr)
                q = (x[j] - v) / gamma
                acc += q * q
            rhat = acc
    return loss, rhat


def run_quad_segment(double c, Py_ssize_t d, double[::1] x, double[::1] gammas,
                     cnp.uint8_t[::1] log_flags, bint want_mb, double prox_tau,
                     cnp.int64_t t0,
                     cnp.int64_t[::1] out_t, double[::1] out_rhat, double[::1] out_loss,
                     double[::1] out_mb, double[::1] out_gamma):
    cdef Py_ssize_t steps = gammas.shape[0]
    cdef Py_ssize_t n_logged = 0
    cdef int status = NCX_OK
    cdef Py_ssize_t s_i, j
    cdef double gamma, loss_v = 0.0, rhat = 0.0, thr, acc, u, v, q
    with nogil:
        for s_i in range(steps):
            gamma = gammas[s_i]
            if log_flags[s_i] != 0:
                _quad_full_eval(c, d, x, &loss_v, &rhat)
                if prox_tau >= 0.0:
                    thr = gamma * prox_tau
                    acc = 0.0
                    for j in range(d):
                        u = x[j] - gamma * (c * x[j])
                        v = _soft(u, thr)
                        q = (x[j] - v) / gamma
                        acc += q * q
                    rhat = acc
                if not (isfinite(loss_v) and isfinite(rhat)):
                    status = NCX_NONFINITE
                    break
                out_t[n_logged] = t0 + s_i
                out_rhat[n_logged] = rhat
                out_loss[n_logged] = loss_v
                out_mb[n_logged] = loss_v if want_mb else NAN
                out_gamma[n_logged] = gamma
                n_logged += 1
            if prox_tau < 0.0:
                for j in range(d):
                    x[j] = x[j] - gamma * (c * x[j])
            else:
                thr = gamma * prox_tau
                for j in range(d):
                    x[j] = _soft(x[j] - gamma * (c * x[j]), thr)
    return n_logged, status
