"""Compiled integration kernels.

Everything in here works on flat float64 arrays and returns integer status
codes; the public modules translate codes into exceptions. A "system" is a
pair of numba functions ``rhs(t, y, p, dy) -> status`` and
``jac(t, y, p, J) -> status`` sharing one parameter vector ``p``.
"""

import numpy as np
from numba import njit

OK = 0
BLOWUP = 1
POLE = 2
NONFINITE = 3
STEP_UNDERFLOW = 4
MAX_STEPS = 5
DEGENERATE = 6

POLE_EPS = 1e-12

# model parameter vector layout
P_MU, P_A0, P_A1, P_A2, P_BETA, P_OMEGA, P_GAMMA, P_M, P_A, P_B, P_C = range(11)
# driven branch parameter vector layout
D_MU, D_OFFSET, D_AMP, D_FREQ, D_A, D_B, D_C = range(7)

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
A21 = 1.0 / 5.0
A31, A32 = 3.0 / 40.0, 9.0 / 40.0
A41, A42, A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
A51, A52, A53, A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
A61, A62, A63, A64, A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                           49.0 / 176.0, -5103.0 / 18656.0)
B1, B3, B4, B5, B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
E1, E3, E4, E5, E6, E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                          -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

SAFETY = 0.9
FAC_MIN = 0.2
FAC_MAX = 10.0
PI_BETA = 0.04
ORDER_EXP = 0.2 - 0.75 * PI_BETA


@njit(cache=True, nogil=True)
def g_value(x, a, b, c):
    r = x / (x + c)
    return x * (a + b * r * r)


@njit(cache=True, nogil=True)
def g_slope(x, a, b, c):
    s = c + x
    return (a * s * s * s + b * x * x * (3.0 * c + x)) / (s * s * s)


@njit(cache=True, nogil=True)
def model_rhs(t, y, p, dy):
    x = y[0]
    c = p[P_C]
    if abs(x + c) < POLE_EPS:
        return POLE
    gx = g_value(x, p[P_A], p[P_B], c)
    om = p[P_OMEGA]
    dy[0] = (y[1] - gx) / p[P_MU]
    dy[1] = p[P_A0] - p[P_A1] * y[1] - p[P_A2] * x + p[P_A1] * p[P_M] * y[2]
    dy[2] = y[3]
    dy[3] = -p[P_BETA] * y[3] - om * om * y[2] + p[P_GAMMA] * x
    return OK


@njit(cache=True, nogil=True)
def model_jac(t, y, p, J):
    x = y[0]
    c = p[P_C]
    if abs(x + c) < POLE_EPS:
        return POLE
    mu = p[P_MU]
    om = p[P_OMEGA]
    J[:, :] = 0.0
    J[0, 0] = -g_slope(x, p[P_A], p[P_B], c) / mu
    J[0, 1] = 1.0 / mu
    J[1, 0] = -p[P_A2]
    J[1, 1] = -p[P_A1]
    J[1, 2] = p[P_M] * p[P_A1]
    J[2, 3] = 1.0
    J[3, 0] = p[P_GAMMA]
    J[3, 2] = -om * om
    J[3, 3] = -p[P_BETA]
    return OK


@njit(cache=True, nogil=True)
def driven_rhs(t, y, p, dy):
    x = y[0]
    c = p[D_C]
    if abs(x + c) < POLE_EPS:
        return POLE
    drive = p[D_OFFSET] + p[D_AMP] * np.sin(p[D_FREQ] * t)
    dy[0] = (drive - g_value(x, p[D_A], p[D_B], c)) / p[D_MU]
    return OK


@njit(cache=True, nogil=True)
def _err_norm(y, ynew, err, rtol, atol):
    n = y.shape[0]
    acc = 0.0
    for i in range(n):
        sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
        e = err[i] / sc
        acc += e * e
    return np.sqrt(acc / n)


def make_stepper(rhs):
    """Build a compiled adaptive Dormand-Prince driver around ``rhs``.

    The driver advances from ``t`` to exactly ``t_end`` and returns
    ``(status, t, h_next, err_prev)``. ``y`` and ``k1`` (derivative at y,
    first-same-as-last) are updated in place.
    """

    @njit(nogil=True)
    def advance(t, t_end, y, k1, p, h, h_max, rtol, atol, bound, err_prev,
                work, max_steps):
        n = y.shape[0]
        k2 = work[0]
        k3 = work[1]
        k4 = work[2]
        k5 = work[3]
        k6 = work[4]
        k7 = work[5]
        ytmp = work[6]
        ynew = work[7]
        errv = work[8]
        steps = 0
        while t < t_end:
            if steps >= max_steps:
                return MAX_STEPS, t, h, err_prev
            last = False
            hh = min(h, h_max)
            if t + hh >= t_end:
                hh = t_end - t
                last = True
            if hh < 1e-14 * max(1.0, abs(t)):
                if last:
                    return OK, t_end, h, err_prev
                return STEP_UNDERFLOW, t, h, err_prev

            for i in range(n):
                ytmp[i] = y[i] + hh * A21 * k1[i]
            st = rhs(t + C2 * hh, ytmp, p, k2)
            if st == OK:
                for i in range(n):
                    ytmp[i] = y[i] + hh * (A31 * k1[i] + A32 * k2[i])
                st = rhs(t + C3 * hh, ytmp, p, k3)
            if st == OK:
                for i in range(n):
                    ytmp[i] = y[i] + hh * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
                st = rhs(t + C4 * hh, ytmp, p, k4)
            if st == OK:
                for i in range(n):
                    ytmp[i] = y[i] + hh * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i]
                                           + A54 * k4[i])
                st = rhs(t + C5 * hh, ytmp, p, k5)
            if st == OK:
                for i in range(n):
                    ytmp[i] = y[i] + hh * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i]
                                           + A64 * k4[i] + A65 * k5[i])
                st = rhs(t + hh, ytmp, p, k6)
            if st == OK:
                for i in range(n):
                    ynew[i] = y[i] + hh * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i]
                                           + B5 * k5[i] + B6 * k6[i])
                st = rhs(t + hh, ynew, p, k7)
            steps += 1

            if st != OK:
                # a trial stage hit the pole; retry smaller before giving up
                if hh > 1e-10:
                    h = 0.25 * hh
                    continue
                return st, t, h, err_prev

            for i in range(n):
                errv[i] = hh * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i]
                                + E6 * k6[i] + E7 * k7[i])
            err = _err_norm(y, ynew, errv, rtol, atol)
            if not np.isfinite(err):
                h = 0.25 * hh
                continue

            if err <= 1.0:
                if err == 0.0:
                    fac = FAC_MAX
                else:
                    fac = SAFETY * err ** (-ORDER_EXP) * err_prev ** PI_BETA
                    fac = min(FAC_MAX, max(FAC_MIN, fac))
                err_prev = max(err, 1e-4)
                t = t_end if last else t + hh
                nrm = 0.0
                for i in range(n):
                    y[i] = ynew[i]
                    k1[i] = k7[i]
                    nrm += ynew[i] * ynew[i]
                if not np.isfinite(nrm):
                    return NONFINITE, t, h, err_prev
                if np.sqrt(nrm) > bound:
                    return BLOWUP, t, h, err_prev
                # a clamped final step must not shrink the controller's proposal
                if last and fac >= 1.0:
                    h = max(h, hh * fac)
                else:
                    h = hh * fac
            else:
                fac = max(FAC_MIN, SAFETY * err ** (-0.2))
                h = hh * fac
        return OK, t, h, err_prev

    return advance


def make_sampler(rhs):
    """Compiled driver recording the state at each requested output time."""
    advance = make_stepper(rhs)

    @njit(nogil=True)
    def run(y0, p, t0, t_out, h_init, h_max, rtol, atol, bound, max_steps, out):
        n = y0.shape[0]
        y = y0.copy()
        k1 = np.empty(n)
        work = np.empty((9, n))
        st = rhs(t0, y, p, k1)
        if st != OK:
            return st, t0, 0
        t = t0
        h = h_init
        err_prev = 1e-4
        for j in range(t_out.shape[0]):
            if t_out[j] > t:
                st, t, h, err_prev = advance(t, t_out[j], y, k1, p, h, h_max,
                                             rtol, atol, bound, err_prev, work,
                                             max_steps)
                if st != OK:
                    return st, t, j
            for i in range(n):
                out[j, i] = y[i]
        return OK, t, t_out.shape[0]

    return run


def make_tangent_system(rhs, jac, n):
    """Extend an n-dimensional system by n tangent vectors and the running
    integral of the Jacobian trace.

    Layout: ``[state (n), V row-major (n*n, column j is tangent vector j),
    integral of trace J (1)]``.
    """

    @njit(nogil=True)
    def ext_rhs(t, Y, p, dY):
        st = rhs(t, Y[:n], p, dY[:n])
        if st != OK:
            return st
        J = np.empty((n, n))
        st = jac(t, Y[:n], p, J)
        if st != OK:
            return st
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc += J[i, k] * Y[n + k * n + j]
                dY[n + i * n + j] = acc
        tr = 0.0
        for i in range(n):
            tr += J[i, i]
        dY[n + n * n] = tr
        return OK

    return ext_rhs


@njit(cache=True, nogil=True)
def gram_schmidt(V, norms):
    """Modified Gram-Schmidt on the columns of V, in place."""
    n = V.shape[0]
    k = V.shape[1]
    for j in range(k):
        for i in range(j):
            d = 0.0
            for r in range(n):
                d += V[r, i] * V[r, j]
            for r in range(n):
                V[r, j] -= d * V[r, i]
        s = 0.0
        for r in range(n):
            s += V[r, j] * V[r, j]
        s = np.sqrt(s)
        norms[j] = s
        if s > 0.0:
            for r in range(n):
                V[r, j] /= s


def make_lyapunov(ext_rhs, n):
    """Compiled Benettin loop over a tangent-extended system."""
    advance = make_stepper(ext_rhs)
    dim = n + n * n + 1

    @njit(nogil=True)
    def run(Y0, p, t0, renorm, n_renorm, h_init, h_max, rtol, atol, bound,
            max_steps, tiny, sums, history, trace_int):
        Y = Y0.copy()
        k1 = np.empty(dim)
        work = np.empty((9, dim))
        norms = np.empty(n)
        st = ext_rhs(t0, Y, p, k1)
        if st != OK:
            return st, t0, 0
        t = t0
        h = h_init
        err_prev = 1e-4
        for j in range(n_renorm):
            t_next = t0 + (j + 1) * renorm
            st, t, h, err_prev = advance(t, t_next, Y, k1, p, h, h_max, rtol,
                                         atol, bound, err_prev, work, max_steps)
            if st != OK:
                return st, t, j
            V = Y[n:n + n * n].reshape((n, n)).copy()
            gram_schmidt(V, norms)
            for i in range(n):
                if norms[i] < tiny or not np.isfinite(norms[i]):
                    return DEGENERATE, t, j
                sums[i] += np.log(norms[i])
                history[j, i] = sums[i] / (t - t0)
            Y[n:n + n * n] = V.ravel()
            trace_int[0] += Y[n + n * n]
            Y[n + n * n] = 0.0
            # derivative of the tangent block changed with the reset
            st = ext_rhs(t, Y, p, k1)
            if st != OK:
                return st, t, j
        return OK, t, n_renorm

    return run


@njit(cache=True, nogil=True)
def model_tangent_rhs(t, Y, p, dY):
    """Tangent-extended model (same layout as :func:`make_tangent_system`),
    exploiting the sparsity of the Jacobian."""
    st = model_rhs(t, Y[:4], p, dY[:4])
    if st != OK:
        return st
    mu = p[P_MU]
    om2 = p[P_OMEGA] * p[P_OMEGA]
    j00 = -g_slope(Y[0], p[P_A], p[P_B], p[P_C]) / mu
    j01 = 1.0 / mu
    j12 = p[P_M] * p[P_A1]
    for j in range(4):
        v0 = Y[4 + j]
        v1 = Y[8 + j]
        v2 = Y[12 + j]
        v3 = Y[16 + j]
        dY[4 + j] = j00 * v0 + j01 * v1
        dY[8 + j] = -p[P_A2] * v0 - p[P_A1] * v1 + j12 * v2
        dY[12 + j] = v3
        dY[16 + j] = p[P_GAMMA] * v0 - om2 * v2 - p[P_BETA] * v3
    dY[20] = j00 - p[P_A1] - p[P_BETA]
    return OK
