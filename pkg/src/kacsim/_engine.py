"""Compiled event loops for the single and coupled collision dynamics.

The drivers in :mod:`kacsim.system` pre-draw batches of randomness with a
numpy Generator and hand them to the jitted functions below, which consume
one slot per event.  Keeping the random stream outside the compiled code
makes the python reference stepper and the compiled loop consume draws in
exactly the same order, so the two paths can be compared event by event.

Accumulator layout (float64 arrays mutated in place):

single copy  acc[0] max relative pair conservation error
             acc[1] events processed
coupled      acc[0] max |coupling identity residual| over generic events
             acc[1] max signed pair distance increment over generic events
             acc[2] max relative pair conservation error (both copies)
             acc[3] count of antipodal events (resolved with a random plane;
                    the transported-frame identity does not apply to them)
             acc[4] events processed
             acc[5] max signed pair distance increment over antipodal events
             acc[6] event time at which acc[0] was attained
             acc[7] event time at which acc[1] was attained

Conservation errors are relative: energy errors against the pair energy,
momentum errors against the pair RMS speed, so the check is scale free.

Status codes returned by the advance functions: 0 = reached t_stop,
1 = random batch exhausted, 2 = event budget reached.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


PARALLEL_EPS = 1e-13
ANTIPODAL_EPS = 1e-9


@njit(cache=True)
def _unit_of_diff(a, b, out):
    """out = (a - b)/|a - b|; returns |a - b|.  Zero difference -> e_0."""
    d = a.shape[0]
    s = 0.0
    for k in range(d):
        out[k] = a[k] - b[k]
        s += out[k] * out[k]
    r = np.sqrt(s)
    if r > 0.0:
        inv = 1.0 / r
        for k in range(d):
            out[k] *= inv
    else:
        for k in range(d):
            out[k] = 0.0
        out[0] = 1.0
    return r


@njit(cache=True)
def _ortho_axis(n, out):
    """Deterministic unit vector orthogonal to n (same rule as geometry)."""
    d = n.shape[0]
    k0 = 0
    best = abs(n[0])
    for k in range(1, d):
        a = abs(n[k])
        if a < best:
            best = a
            k0 = k
    c = n[k0]
    s = 0.0
    for k in range(d):
        w = -c * n[k]
        if k == k0:
            w += 1.0
        out[k] = w
        s += w * w
    inv = 1.0 / np.sqrt(s)
    for k in range(d):
        out[k] *= inv


@njit(cache=True)
def _complement_unit(g, n, m, out):
    """Unit vector along g projected orthogonal to the orthonormal pair (n, m).

    Falls back to a coordinate axis if the projection annihilates g (a
    probability-zero event kept for robustness).
    """
    d = n.shape[0]
    a = 0.0
    b = 0.0
    for k in range(d):
        a += g[k] * n[k]
        b += g[k] * m[k]
    s = 0.0
    for k in range(d):
        out[k] = g[k] - a * n[k] - b * m[k]
        s += out[k] * out[k]
    if s > 1e-24:
        inv = 1.0 / np.sqrt(s)
        for k in range(d):
            out[k] *= inv
        return
    for j in range(d):
        a = n[j]
        b = m[j]
        s = 0.0
        for k in range(d):
            w = -a * n[k] - b * m[k]
            if k == j:
                w += 1.0
            out[k] = w
            s += w * w
        if s > 0.25:
            inv = 1.0 / np.sqrt(s)
            for k in range(d):
                out[k] *= inv
            return


@njit(cache=True)
def _reproject(v):
    """Recenter to zero mean and rescale to unit mean energy, in place."""
    n, d = v.shape
    for k in range(d):
        mu = 0.0
        for i in range(n):
            mu += v[i, k]
        mu /= n
        for i in range(n):
            v[i, k] -= mu
    s = 0.0
    for i in range(n):
        for k in range(d):
            s += v[i, k] * v[i, k]
    scale = np.sqrt(n / s)
    for i in range(n):
        for k in range(d):
            v[i, k] *= scale


@njit(cache=True)
def advance_kac(v, t, t_next, t_stop, rate, max_events,
                thetas, cphis, exps, pi, pj, gl,
                cursor, proj_ctr, proj_every, acc):
    """Process collision events on a single copy until a stop condition.

    Returns (t, t_next, cursor, proj_ctr, status).
    """
    n, d = v.shape
    nb = thetas.shape[0]
    n_hat = np.empty(d)
    m_hat = np.empty(d)
    l_hat = np.empty(d)
    npr = np.empty(d)
    s_arr = np.empty(d)
    while True:
        if t_next > t_stop:
            return t_stop, t_next, cursor, proj_ctr, 0
        if acc[1] >= max_events:
            return t, t_next, cursor, proj_ctr, 2
        if cursor >= nb:
            return t, t_next, cursor, proj_ctr, 1
        t = t_next
        i = pi[cursor]
        j = pj[cursor]
        r = _unit_of_diff(v[i], v[j], n_hat)
        _ortho_axis(n_hat, m_hat)
        _complement_unit(gl[cursor], n_hat, m_hat, l_hat)
        cphi = cphis[cursor]
        sphi = np.sqrt(max(0.0, 1.0 - cphi * cphi))
        ct = np.cos(thetas[cursor])
        st = np.sin(thetas[cursor])
        e_old = 0.0
        for k in range(d):
            s_arr[k] = v[i, k] + v[j, k]
            e_old += v[i, k] * v[i, k] + v[j, k] * v[j, k]
            npr[k] = ct * n_hat[k] + st * (cphi * m_hat[k] + sphi * l_hat[k])
        e_new = 0.0
        mom_err = 0.0
        for k in range(d):
            a = 0.5 * (s_arr[k] + r * npr[k])
            b = 0.5 * (s_arr[k] - r * npr[k])
            v[i, k] = a
            v[j, k] = b
            e_new += a * a + b * b
            me = abs((a + b) - s_arr[k])
            if me > mom_err:
                mom_err = me
        err = abs(e_new - e_old) / (e_old + 1e-300)
        mom_rel = mom_err / (np.sqrt(e_old) + 1e-300)
        if mom_rel > err:
            err = mom_rel
        if err > acc[0]:
            acc[0] = err
        acc[1] += 1.0
        proj_ctr += 1
        if proj_ctr >= proj_every:
            _reproject(v)
            proj_ctr = 0
        t_next = t + exps[cursor] / rate
        cursor += 1


@njit(cache=True)
def advance_coupled(u, v, t, t_next, t_stop, rate, max_events,
                    thetas, cphis, exps, pi, pj, gl, gs,
                    cursor, proj_ctr, proj_every, acc):
    """Process events on two copies driven by the same randomness.

    Branch rules mirror geometry.transport_frames: generic frames from the
    shared plane, a deterministic common axis for coincident directions, and
    a random plane completion (from ``gs``) for antipodal ones.  Coincident
    directions give both copies the identical outgoing direction, and all
    outgoing directions are renormalized before the update, so pair
    conservation holds to rounding in every branch.

    Returns (t, t_next, cursor, proj_ctr, status).
    """
    n, d = u.shape
    nb = thetas.shape[0]
    nu = np.empty(d)
    nv = np.empty(d)
    mu = np.empty(d)
    mv = np.empty(d)
    l_hat = np.empty(d)
    npu = np.empty(d)
    npv = np.empty(d)
    su = np.empty(d)
    sv = np.empty(d)
    while True:
        if t_next > t_stop:
            return t_stop, t_next, cursor, proj_ctr, 0
        if acc[4] >= max_events:
            return t, t_next, cursor, proj_ctr, 2
        if cursor >= nb:
            return t, t_next, cursor, proj_ctr, 1
        t = t_next
        i = pi[cursor]
        j = pj[cursor]
        r_u = _unit_of_diff(u[i], u[j], nu)
        r_v = _unit_of_diff(v[i], v[j], nv)
        # a zero relative velocity leaves its copy unchanged whatever the
        # outgoing direction; borrow the other copy's direction so the
        # active copy gets a clean marginal draw
        if r_u == 0.0 and r_v > 0.0:
            for k in range(d):
                nu[k] = nv[k]
        elif r_v == 0.0 and r_u > 0.0:
            for k in range(d):
                nv[k] = nu[k]
        c_raw = 0.0
        for k in range(d):
            c_raw += nu[k] * nv[k]
        c = c_raw
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        antipodal = False
        parallel = False
        if 1.0 - c < PARALLEL_EPS:
            parallel = True
            _ortho_axis(nu, mu)
            for k in range(d):
                mv[k] = mu[k]
        elif 1.0 + c < ANTIPODAL_EPS:
            # no continuously transported frame exists; complete the plane
            # with an independent random direction orthogonal to nu
            antipodal = True
            a = 0.0
            for k in range(d):
                a += gs[cursor, k] * nu[k]
            s = 0.0
            for k in range(d):
                mu[k] = gs[cursor, k] - a * nu[k]
                s += mu[k] * mu[k]
            if s > 1e-24:
                inv = 1.0 / np.sqrt(s)
                for k in range(d):
                    mu[k] *= inv
            else:
                _ortho_axis(nu, mu)
            for k in range(d):
                mv[k] = -mu[k]
        else:
            s = 0.0
            for k in range(d):
                mu[k] = nv[k] - c * nu[k]
                s += mu[k] * mu[k]
            inv = 1.0 / np.sqrt(s)
            for k in range(d):
                mu[k] *= inv
            s = 0.0
            for k in range(d):
                mv[k] = nu[k] - c * nv[k]
                s += mv[k] * mv[k]
            inv = -1.0 / np.sqrt(s)
            for k in range(d):
                mv[k] *= inv
        _complement_unit(gl[cursor], nu, mu, l_hat)
        cphi = cphis[cursor]
        sphi = np.sqrt(max(0.0, 1.0 - cphi * cphi))
        ct = np.cos(thetas[cursor])
        st = np.sin(thetas[cursor])
        d_old = 0.0
        e_old_u = 0.0
        e_old_v = 0.0
        for k in range(d):
            su[k] = u[i, k] + u[j, k]
            sv[k] = v[i, k] + v[j, k]
            e_old_u += u[i, k] * u[i, k] + u[j, k] * u[j, k]
            e_old_v += v[i, k] * v[i, k] + v[j, k] * v[j, k]
            wui = u[i, k] - v[i, k]
            wuj = u[j, k] - v[j, k]
            d_old += wui * wui + wuj * wuj
            npu[k] = ct * nu[k] + st * (cphi * mu[k] + sphi * l_hat[k])
            if parallel:
                # axes agree to within the cutoff: both copies take the same
                # outgoing direction, so the pair distance cannot grow from
                # a frame that is stale for one of them
                npv[k] = npu[k]
            else:
                npv[k] = ct * nv[k] + st * (cphi * mv[k] + sphi * l_hat[k])
        s_u = 0.0
        s_v = 0.0
        for k in range(d):
            s_u += npu[k] * npu[k]
            s_v += npv[k] * npv[k]
        inv = 1.0 / np.sqrt(s_u)
        inv_v = 1.0 / np.sqrt(s_v)
        for k in range(d):
            # force exactly unit outgoing directions; near the branch
            # cutoffs the transported frame can be off-orthonormal by the
            # residual angle and would otherwise leak into the energies
            npu[k] *= inv
            npv[k] *= inv_v
        d_new = 0.0
        e_new_u = 0.0
        e_new_v = 0.0
        mom_u = 0.0
        mom_v = 0.0
        for k in range(d):
            a = 0.5 * (su[k] + r_u * npu[k])
            b = 0.5 * (su[k] - r_u * npu[k])
            p = 0.5 * (sv[k] + r_v * npv[k])
            q = 0.5 * (sv[k] - r_v * npv[k])
            u[i, k] = a
            u[j, k] = b
            v[i, k] = p
            v[j, k] = q
            e_new_u += a * a + b * b
            e_new_v += p * p + q * q
            d_new += (a - p) * (a - p) + (b - q) * (b - q)
            me = abs((a + b) - su[k])
            if me > mom_u:
                mom_u = me
            me = abs((p + q) - sv[k])
            if me > mom_v:
                mom_v = me
        delta = d_new - d_old
        err = abs(e_new_u - e_old_u) / (e_old_u + 1e-300)
        err_v = abs(e_new_v - e_old_v) / (e_old_v + 1e-300)
        if err_v > err:
            err = err_v
        mom_rel = mom_u / (np.sqrt(e_old_u) + 1e-300)
        if mom_rel > err:
            err = mom_rel
        mom_rel = mom_v / (np.sqrt(e_old_v) + 1e-300)
        if mom_rel > err:
            err = mom_rel
        if err > acc[2]:
            acc[2] = err
        if antipodal:
            acc[3] += 1.0
            if delta > acc[5]:
                acc[5] = delta
        else:
            resid = delta + st * st * sphi * sphi * (r_u * r_v - r_u * r_v * c_raw)
            if abs(resid) > acc[0]:
                acc[0] = abs(resid)
                acc[6] = t
            if delta > acc[1]:
                acc[1] = delta
                acc[7] = t
        acc[4] += 1.0
        proj_ctr += 1
        if proj_ctr >= proj_every:
            _reproject(u)
            _reproject(v)
            proj_ctr = 0
        t_next = t + exps[cursor] / rate
        cursor += 1
