"""Pure numpy twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def _grde_rhs(A, Q, G, P):
    PA = P @ A
    return Q + PA + PA.T - P @ G @ P


def _grde_step(A, Q, G, P, h):
    k1 = _grde_rhs(A, Q, G, P)
    k2 = _grde_rhs(A, Q, G, P + 0.5 * h * k1)
    k3 = _grde_rhs(A, Q, G, P + 0.5 * h * k2)
    k4 = _grde_rhs(A, Q, G, P + h * k3)
    S = P + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    S = 0.5 * (S + S.T)
    return S, np.linalg.norm(S - P)


def grde_backward(A, Q, G, PT, dt, nsteps):
    A, Q, G = (np.asarray(a, dtype=float) for a in (A, Q, G))
    n = A.shape[0]
    out = np.empty((nsteps + 1, n, n))
    P = np.array(PT, dtype=float)
    out[nsteps] = P
    for step in range(nsteps, 0, -1):
        P, _ = _grde_step(A, Q, G, P, dt)
        out[step - 1] = P
    return out


def grde_stationary(A, Q, G, P0, dt, tol, max_steps):
    A, Q, G = (np.asarray(a, dtype=float) for a in (A, Q, G))
    P = np.array(P0, dtype=float)
    rate = np.inf
    step = 0
    while step < max_steps:
        P, inc = _grde_step(A, Q, G, P, dt)
        rate = inc / dt
        step += 1
        if not np.isfinite(rate) or rate <= tol:
            break
    return P, step, rate


def feedforward_backward(A, G, Pnodes, Pmid, EW, Qr, dseg, B, Upinv, BRE, E, ERE,
                         rQr_half, fT, HT, dt):
    A, G, B, Upinv, E = (np.asarray(a, dtype=float) for a in (A, G, B, Upinv, E))
    Pnodes = np.asarray(Pnodes, dtype=float)
    Pmid = np.asarray(Pmid, dtype=float)
    dseg = np.asarray(dseg, dtype=float)
    N = dseg.shape[0]
    n = A.shape[0]
    f_out = np.empty((N + 1, n))
    H_out = np.empty(N + 1)
    f = np.array(fT, dtype=float)
    H = float(HT)
    f_out[N] = f
    H_out[N] = H

    def rhs(P, f, c, bred, ed, hq):
        df = (A.T - P @ G) @ f + c
        h = B.T @ f + bred
        dH = -0.5 * h @ Upinv @ h + ed @ f + hq
        return df, dH

    for step in range(N, 0, -1):
        d = dseg[step - 1]
        ewd = EW @ d
        ed = E @ d
        bred = BRE @ d
        hq = rQr_half + 0.5 * d @ ERE @ d
        P0, P1 = Pnodes[step], Pnodes[step - 1]
        Pm = Pmid[step - 1]
        c0, cm, c1 = P0 @ ewd - Qr, Pm @ ewd - Qr, P1 @ ewd - Qr
        a1, b1 = rhs(P0, f, c0, bred, ed, hq)
        a2, b2 = rhs(Pm, f + 0.5 * dt * a1, cm, bred, ed, hq)
        a3, b3 = rhs(Pm, f + 0.5 * dt * a2, cm, bred, ed, hq)
        a4, b4 = rhs(P1, f + dt * a3, c1, bred, ed, hq)
        f = f + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        H = H + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        f_out[step - 1] = f
        H_out[step - 1] = H
    return f_out, H_out


def simulate_affine(A, B, E, K, kff, dseg, x0, dt):
    A, B, E = (np.asarray(a, dtype=float) for a in (A, B, E))
    K = np.asarray(K, dtype=float)
    kff = np.asarray(kff, dtype=float)
    dseg = np.asarray(dseg, dtype=float)
    N = dseg.shape[0]
    n, m = B.shape
    x_out = np.full((N + 1, n), np.nan)
    u_out = np.full((N, m), np.nan)
    x = np.array(x0, dtype=float)
    x_out[0] = x
    # divergence is detected below, so overflow along the way is not an error
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(N):
            u = -K[step] @ x - kff[step]
            u_out[step] = u
            c = B @ u + E @ dseg[step]
            k1 = A @ x + c
            k2 = A @ (x + 0.5 * dt * k1) + c
            k3 = A @ (x + 0.5 * dt * k2) + c
            k4 = A @ (x + dt * k3) + c
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            x_out[step + 1] = x
            if not np.all(np.isfinite(x)):
                return x_out, u_out, step
    return x_out, u_out, N
