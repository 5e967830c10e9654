"""Pure-Python fallback kernels.

These implement exactly the same sequence of IEEE-754 operations as the
compiled extension (same accumulation order, same branchwise sigmoid and
softplus, libm exp/log1p through ``math``), so the two backends produce
bit-identical traces.  They are 1-2 orders of magnitude slower and exist
so the package works without a C toolchain; see benchmarks/bench_kernels.py.

Kernel contract (shared with ``_fastloop``):

* ``run_ncx_segment`` advances the iterate over a block of steps for the
  folded-logistic + bounded-penalty objective stored as CSR arrays.
  ``idx``/``idx_off`` hold the per-step sample indices (``full_batch``
  replaces them with all rows in order).  Steps flagged in ``log_flags``
  record (t, r_hat, loss, minibatch loss, gamma) *before* the update.
  ``prox_tau < 0`` means plain SGD; ``prox_tau >= 0`` applies the l1 soft
  threshold with scale gamma*prox_tau after the gradient step and logs
  the prox-gradient residual norm instead of the gradient norm.
* ``eval_ncx`` / ``eval_quad`` evaluate (loss, r_hat) at the current
  iterate without stepping (used for the final trace row).
* Return value of segment runners: (n_logged, status); status 1 means a
  non-finite loss or residual was met at a log point and the run stopped
  with the iterate left at the last finite state.
"""

import math

NCX_OK = 0
NCX_NONFINITE = 1


def _sigmoid_softplus(z):
    """(sigma(-z), ln(1+exp(-z))) with one exp, overflow-safe."""
    if z >= 0.0:
        e = math.exp(-z)
        return e / (1.0 + e), math.log1p(e)
    e = math.exp(z)
    return 1.0 / (1.0 + e), -z + math.log1p(e)


def _soft(u, thr):
    if u > thr:
        return u - thr
    if u < -thr:
        return u + thr
    return 0.0


def _ncx_full_eval(indptr, indices, data, n, d, lam, xs, g):
    """Full loss and gradient of the logistic+penalty objective at xs.

    Fills g with grad F and returns (loss, r_hat) where r_hat = ||g||^2.
    """
    for j in range(d):
        g[j] = 0.0
    acc_loss = 0.0
    for r in range(n):
        z = 0.0
        for p in range(indptr[r], indptr[r + 1]):
            z += data[p] * xs[indices[p]]
        s, sp = _sigmoid_softplus(z)
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
    return acc_loss * inv_n + lam * acc_pen, rhat


def _prox_residual_sq(xs, g, d, gamma, tau):
    """||(x - prox_l1(x - gamma*g, gamma*tau)) / gamma||^2."""
    thr = gamma * tau
    acc = 0.0
    for j in range(d):
        u = xs[j] - gamma * g[j]
        v = _soft(u, thr)
        q = (xs[j] - v) / gamma
        acc += q * q
    return acc


def eval_ncx(indptr, indices, data, d, lam, x, prox_tau, gamma):
    n = len(indptr) - 1
    xs = list(x)
    g = [0.0] * d
    loss, rhat = _ncx_full_eval(indptr, indices, data, n, d, lam, xs, g)
    if prox_tau >= 0.0:
        rhat = _prox_residual_sq(xs, g, d, gamma, prox_tau)
    return loss, rhat


def run_ncx_segment(indptr, indices, data, d, lam, x, full_batch, idx, idx_off,
                    gammas, log_flags, want_mb, prox_tau, t0,
                    out_t, out_rhat, out_loss, out_mb, out_gamma):
    n = len(indptr) - 1
    xs = list(x)
    g = [0.0] * d
    inv_n = 1.0 / n
    two_lam = 2.0 * lam
    steps = len(gammas)
    n_logged = 0
    status = NCX_OK
    for s_i in range(steps):
        gamma = gammas[s_i]
        if log_flags[s_i]:
            loss_v, rhat = _ncx_full_eval(indptr, indices, data, n, d, lam, xs, g)
            if prox_tau >= 0.0:
                rhat = _prox_residual_sq(xs, g, d, gamma, prox_tau)
            if not (math.isfinite(loss_v) and math.isfinite(rhat)):
                status = NCX_NONFINITE
                break
        # Minibatch gradient (and optionally its loss) at the samples of
        # this step; the regularizer rides along on every component.
        for j in range(d):
            g[j] = 0.0
        acc_mb = 0.0
        if full_batch:
            lo, hi = 0, n
        else:
            lo, hi = idx_off[s_i], idx_off[s_i + 1]
        b = hi - lo
        for k in range(lo, hi):
            r = k if full_batch else idx[k]
            z = 0.0
            for p in range(indptr[r], indptr[r + 1]):
                z += data[p] * xs[indices[p]]
            s, sp = _sigmoid_softplus(z)
            acc_mb += sp
            coef = -s
            for p in range(indptr[r], indptr[r + 1]):
                g[indices[p]] += coef * data[p]
        if log_flags[s_i]:
            if want_mb:
                acc_pen = 0.0
                for j in range(d):
                    sq = xs[j] * xs[j]
                    acc_pen += sq / (1.0 + sq)
                mb = acc_mb * (1.0 / b) + lam * acc_pen
            else:
                mb = math.nan
            out_t[n_logged] = t0 + s_i
            out_rhat[n_logged] = rhat
            out_loss[n_logged] = loss_v
            out_mb[n_logged] = mb
            out_gamma[n_logged] = gamma
            n_logged += 1
        inv_b = 1.0 / b
        if prox_tau < 0.0:
            for j in range(d):
                u = xs[j]
                w = 1.0 + u * u
                gj = g[j] * inv_b + two_lam * u / (w * w)
                xs[j] = u - gamma * gj
        else:
            thr = gamma * prox_tau
            for j in range(d):
                u = xs[j]
                w = 1.0 + u * u
                gj = g[j] * inv_b + two_lam * u / (w * w)
                xs[j] = _soft(u - gamma * gj, thr)
    for j in range(d):
        x[j] = xs[j]
    return n_logged, status


def _quad_full_eval(c, d, xs):
    acc = 0.0
    rhat = 0.0
    for j in range(d):
        u = xs[j]
        acc += u * u
        gj = c * u
        rhat += gj * gj
    return 0.5 * c * acc, rhat


def eval_quad(c, d, x, prox_tau, gamma):
    xs = list(x)
    loss, rhat = _quad_full_eval(c, d, xs)
    if prox_tau >= 0.0:
        thr = gamma * prox_tau
        acc = 0.0
        for j in range(d):
            u = xs[j] - gamma * (c * xs[j])
            v = _soft(u, thr)
            q = (xs[j] - v) / gamma
            acc += q * q
        rhat = acc
    return loss, rhat


def run_quad_segment(c, d, x, gammas, log_flags, want_mb, prox_tau, t0,
                     out_t, out_rhat, out_loss, out_mb, out_gamma):
    xs = list(x)
    steps = len(gammas)
    n_logged = 0
    status = NCX_OK
    for s_i in range(steps):
        gamma = gammas[s_i]
        if log_flags[s_i]:
            loss_v, rhat = _quad_full_eval(c, d, xs)
            if prox_tau >= 0.0:
                thr = gamma * prox_tau
                acc = 0.0
                for j in range(d):
                    u = xs[j] - gamma * (c * xs[j])
                    v = _soft(u, thr)
                    q = (xs[j] - v) / gamma
                    acc += q * q
                rhat = acc
            if not (math.isfinite(loss_v) and math.isfinite(rhat)):
                status = NCX_NONFINITE
                break
            out_t[n_logged] = t0 + s_i
            out_rhat[n_logged] = rhat
            out_loss[n_logged] = loss_v
            out_mb[n_logged] = loss_v if want_mb else math.nan
            out_gamma[n_logged] = gamma
            n_logged += 1
        if prox_tau < 0.0:
            for j in range(d):
                xs[j] = xs[j] - gamma * (c * xs[j])
        else:
            thr = gamma * prox_tau
            for j in range(d):
                xs[j] = _soft(xs[j] - gamma * (c * xs[j]), thr)
    for j in range(d):
        x[j] = xs[j]
    return n_logged, status
