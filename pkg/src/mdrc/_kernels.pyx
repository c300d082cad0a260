# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled RK4 kernels.

Every routine here has a line-for-line numpy twin in ``_pykernels``; the two
must stay interchangeable (same arguments, same return values).
"""

import numpy as np
from libc.math cimport sqrt, isfinite


cdef void _grde_rhs(double[:, ::1] A, double[:, ::1] Q, double[:, ::1] G,
                    double[:, ::1] P, double[:, ::1] W, double[:, ::1] out) noexcept:
    # d/ds P = Q + PA + A'P - P G P, s = T - t
    cdef Py_ssize_t n = A.shape[0]
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += P[i, k] * G[k, j]
            W[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = Q[i, j]
            for k in range(n):
                acc += P[i, k] * A[k, j] + A[k, i] * P[k, j] - W[i, k] * P[k, j]
            out[i, j] = acc


cdef void _axpy2(double[:, ::1] X, double a, double[:, ::1] K, double[:, ::1] out) noexcept:
    cdef Py_ssize_t n = X.shape[0], m = X.shape[1], i, j
    for i in range(n):
        for j in range(m):
            out[i, j] = X[i, j] + a * K[i, j]


cdef double _grde_step(double[:, ::1] A, double[:, ::1] Q, double[:, ::1] G,
                       double[:, ::1] P, double h, double[:, ::1] W,
                       double[:, ::1] S, double[:, ::1] k1, double[:, ::1] k2,
                       double[:, ::1] k3, double[:, ::1] k4) noexcept:
    """One symmetrized RK4 step in place; returns the Frobenius norm of the increment."""
    cdef Py_ssize_t n = A.shape[0], i, j
    cdef double inc, sq = 0.0, a, b
    _grde_rhs(A, Q, G, P, W, k1)
    _axpy2(P, 0.5 * h, k1, S)
    _grde_rhs(A, Q, G, S, W, k2)
    _axpy2(P, 0.5 * h, k2, S)
    _grde_rhs(A, Q, G, S, W, k3)
    _axpy2(P, h, k3, S)
    _grde_rhs(A, Q, G, S, W, k4)
    for i in range(n):
        for j in range(n):
            S[i, j] = P[i, j] + (h / 6.0) * (k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
    for i in range(n):
        for j in range(i, n):
            a = 0.5 * (S[i, j] + S[j, i])
            inc = a - P[i, j]
            if i == j:
                sq += inc * inc
            else:
                b = a - P[j, i]
                sq += inc * inc + b * b
            P[i, j] = a
            P[j, i] = a
    return sqrt(sq)


def grde_backward(A, Q, G, PT, double dt, Py_ssize_t nsteps):
    """Integrate the Riccati ODE backward from ``PT``; returns nodes ``P[0..N]``."""
    cdef double[:, ::1] A_ = np.array(A, dtype=float, order="C")
    cdef double[:, ::1] Q_ = np.array(Q, dtype=float, order="C")
    cdef double[:, ::1] G_ = np.array(G, dtype=float, order="C")
    cdef Py_ssize_t n = A_.shape[0], i, j, step
    out = np.empty((nsteps + 1, n, n))
    cdef double[:, :, ::1] out_ = out
    cdef double[:, ::1] P = np.array(PT, dtype=float, order="C")
    cdef double[:, ::1] W = np.empty((n, n)), S = np.empty((n, n))
    cdef double[:, ::1] k1 = np.empty((n, n)), k2 = np.empty((n, n))
    cdef double[:, ::1] k3 = np.empty((n, n)), k4 = np.empty((n, n))
    out[nsteps] = PT
    for step in range(nsteps, 0, -1):
        _grde_step(A_, Q_, G_, P, dt, W, S, k1, k2, k3, k4)
        for i in range(n):
            for j in range(n):
                out_[step - 1, i, j] = P[i, j]
    return out


def grde_stationary(A, Q, G, P0, double dt, double tol, Py_ssize_t max_steps):
    """Step the Riccati ODE backward until ``||dP|| / dt <= tol``.

    Returns ``(P, steps_taken, last_rate)``.
    """
    cdef double[:, ::1] A_ = np.array(A, dtype=float, order="C")
    cdef double[:, ::1] Q_ = np.array(Q, dtype=float, order="C")
    cdef double[:, ::1] G_ = np.array(G, dtype=float, order="C")
    cdef Py_ssize_t n = A_.shape[0], step = 0
    P_arr = np.array(P0, dtype=float, order="C")
    cdef double[:, ::1] P = P_arr
    cdef double[:, ::1] W = np.empty((n, n)), S = np.empty((n, n))
    cdef double[:, ::1] k1 = np.empty((n, n)), k2 = np.empty((n, n))
    cdef double[:, ::1] k3 = np.empty((n, n)), k4 = np.empty((n, n))
    cdef double rate = np.inf
    while step < max_steps:
        rate = _grde_step(A_, Q_, G_, P, dt, W, S, k1, k2, k3, k4) / dt
        step += 1
        if not isfinite(rate):
            break
        if rate <= tol:
            break
    return P_arr, step, rate


cdef void _ff_rhs(double[:, ::1] A, double[:, ::1] G, double[:, ::1] P,
                  double[::1] f, double[::1] c, double[:, ::1] B, double[:, ::1] Upinv,
                  double[::1] bred, double[::1] ed, double hq, double[::1] h,
                  double[::1] dfo, double* dHo) noexcept:
    # d/ds f = (A' - P G) f + c,   c = P (E - W) d - Q r   (precomputed per stage)
    # d/ds H = -1/2 h' U^+ h + d'E'f + 1/2 r'Qr + 1/2 d'E'REd,  h = B'f + B'RE d
    cdef Py_ssize_t n = A.shape[0], m = B.shape[1], i, j, k
    cdef double acc, pg, quad
    for i in range(n):
        acc = c[i]
        for k in range(n):
            pg = 0.0
            for j in range(n):
                pg += P[i, j] * G[j, k]
            acc += (A[k, i] - pg) * f[k]
        dfo[i] = acc
    for i in range(m):
        acc = bred[i]
        for k in range(n):
            acc += B[k, i] * f[k]
        h[i] = acc
    quad = 0.0
    for i in range(m):
        acc = 0.0
        for j in range(m):
            acc += Upinv[i, j] * h[j]
        quad += h[i] * acc
    acc = 0.0
    for i in range(n):
        acc += ed[i] * f[i]
    dHo[0] = -0.5 * quad + acc + hq


def feedforward_backward(A, G, Pnodes, Pmid, EW, Qr, dseg, B, Upinv, BRE, E, ERE,
                         double rQr_half, fT, double HT, double dt):
    """Backward RK4 for the feedforward vector ``f`` and the cost offset ``H``.

    ``dseg[i]`` is the disturbance held on ``[t_i, t_{i+1}]`` and ``Pmid[i]``
    the Riccati solution at that interval's midpoint.
    """
    cdef double[:, ::1] A_ = np.array(A, dtype=float, order="C")
    cdef double[:, ::1] G_ = np.array(G, dtype=float, order="C")
    cdef double[:, :, ::1] Pn = np.array(Pnodes, dtype=float, order="C")
    cdef double[:, :, ::1] Pc = np.array(Pmid, dtype=float, order="C")
    cdef double[:, ::1] EW_ = np.array(EW, dtype=float, order="C")
    cdef double[::1] Qr_ = np.array(Qr, dtype=float, order="C")
    cdef double[:, ::1] ds = np.array(dseg, dtype=float, order="C")
    cdef double[:, ::1] B_ = np.array(B, dtype=float, order="C")
    cdef double[:, ::1] Ui = np.array(Upinv, dtype=float, order="C")
    cdef double[:, ::1] BRE_ = np.array(BRE, dtype=float, order="C")
    cdef double[:, ::1] E_ = np.array(E, dtype=float, order="C")
    cdef double[:, ::1] ERE_ = np.array(ERE, dtype=float, order="C")
    cdef Py_ssize_t N = ds.shape[0], q = ds.shape[1]
    cdef Py_ssize_t n = A_.shape[0], m = B_.shape[1], i, j, k, step, st
    f_out = np.empty((N + 1, n))
    H_out = np.empty(N + 1)
    cdef double[:, ::1] fo = f_out
    cdef double[::1] Ho = H_out
    cdef double[:, ::1] Pm = np.empty((n, n))
    cdef double[::1] f = np.array(fT, dtype=float), fs = np.empty(n)
    cdef double[::1] c0 = np.empty(n), cm = np.empty(n), c1 = np.empty(n)
    cdef double[::1] bred = np.empty(m), ed = np.empty(n), hv = np.empty(m)
    cdef double[:, ::1] kf = np.empty((4, n))
    cdef double kH[4]
    cdef double H = HT, acc, hq, dHs
    cdef double[::1] ewd = np.empty(n)
    for i in range(n):
        fo[N, i] = f[i]
    Ho[N] = H
    for step in range(N, 0, -1):
        # step integrates s from T - t_step to T - t_{step-1}; d held on [t_{step-1}, t_step]
        for i in range(n):
            acc = 0.0
            for k in range(q):
                acc += EW_[i, k] * ds[step - 1, k]
            ewd[i] = acc
            acc = 0.0
            for k in range(q):
                acc += E_[i, k] * ds[step - 1, k]
            ed[i] = acc
        for i in range(m):
            acc = 0.0
            for k in range(q):
                acc += BRE_[i, k] * ds[step - 1, k]
            bred[i] = acc
        hq = rQr_half
        for i in range(q):
            for k in range(q):
                hq += 0.5 * ds[step - 1, i] * ERE_[i, k] * ds[step - 1, k]
        for i in range(n):
            for j in range(n):
                Pm[i, j] = Pc[step - 1, i, j]
        for i in range(n):
            acc = -Qr_[i]
            for k in range(n):
                acc += Pn[step, i, k] * ewd[k]
            c0[i] = acc
            acc = -Qr_[i]
            for k in range(n):
                acc += Pm[i, k] * ewd[k]
            cm[i] = acc
            acc = -Qr_[i]
            for k in range(n):
                acc += Pn[step - 1, i, k] * ewd[k]
            c1[i] = acc
        _ff_rhs(A_, G_, Pn[step], f, c0, B_, Ui, bred, ed, hq, hv, kf[0], &kH[0])
        for i in range(n):
            fs[i] = f[i] + 0.5 * dt * kf[0, i]
        _ff_rhs(A_, G_, Pm, fs, cm, B_, Ui, bred, ed, hq, hv, kf[1], &kH[1])
        for i in range(n):
            fs[i] = f[i] + 0.5 * dt * kf[1, i]
        _ff_rhs(A_, G_, Pm, fs, cm, B_, Ui, bred, ed, hq, hv, kf[2], &kH[2])
        for i in range(n):
            fs[i] = f[i] + dt * kf[2, i]
        _ff_rhs(A_, G_, Pn[step - 1], fs, c1, B_, Ui, bred, ed, hq, hv, kf[3], &kH[3])
        for i in range(n):
            f[i] = f[i] + (dt / 6.0) * (kf[0, i] + 2.0 * kf[1, i] + 2.0 * kf[2, i] + kf[3, i])
            fo[step - 1, i] = f[i]
        H = H + (dt / 6.0) * (kH[0] + 2.0 * kH[1] + 2.0 * kH[2] + kH[3])
        Ho[step - 1] = H
    return f_out, H_out


def simulate_affine(A, B, E, K, kff, dseg, x0, double dt):
    """RK4 with zero-order-held input ``u_i = -K_i x_i - k_i`` on each step.

    Returns ``(x, u, completed)``; ``completed < N`` flags a non-finite state.
    """
    cdef double[:, ::1] A_ = np.array(A, dtype=float, order="C")
    cdef double[:, ::1] B_ = np.array(B, dtype=float, order="C")
    cdef double[:, ::1] E_ = np.array(E, dtype=float, order="C")
    cdef double[:, :, ::1] K_ = np.array(K, dtype=float, order="C")
    cdef double[:, ::1] k_ = np.array(kff, dtype=float, order="C")
    cdef double[:, ::1] ds = np.array(dseg, dtype=float, order="C")
    cdef Py_ssize_t N = ds.shape[0], q = ds.shape[1]
    cdef Py_ssize_t n = A_.shape[0], m = B_.shape[1], i, j, st, step
    x_out = np.full((N + 1, n), np.nan)
    u_out = np.full((N, m), np.nan)
    cdef double[:, ::1] xo = x_out
    cdef double[:, ::1] uo = u_out
    cdef double[::1] x = np.array(x0, dtype=float), xs = np.empty(n), c = np.empty(n)
    cdef double[:, ::1] kk = np.empty((4, n))
    cdef double acc, coef
    cdef bint ok
    for i in range(n):
        xo[0, i] = x[i]
    for step in range(N):
        for i in range(m):
            acc = -k_[step, i]
            for j in range(n):
                acc -= K_[step, i, j] * x[j]
            uo[step, i] = acc
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc += B_[i, j] * uo[step, j]
            for j in range(q):
                acc += E_[i, j] * ds[step, j]
            c[i] = acc
        for st in range(4):
            coef = 0.0 if st == 0 else (dt if st == 3 else 0.5 * dt)
            for i in range(n):
                xs[i] = x[i] if st == 0 else x[i] + coef * kk[st - 1, i]
            for i in range(n):
                acc = c[i]
                for j in range(n):
                    acc += A_[i, j] * xs[j]
                kk[st, i] = acc
        ok = True
        for i in range(n):
            x[i] = x[i] + (dt / 6.0) * (kk[0, i] + 2.0 * kk[1, i] + 2.0 * kk[2, i] + kk[3, i])
            if not isfinite(x[i]):
                ok = False
            xo[step + 1, i] = x[i]
        if not ok:
            return x_out, u_out, step
    return x_out, u_out, N
