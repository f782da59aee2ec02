"""Compiled element kernels for the hot assembly loops.

These mirror the reference numpy implementations in assembly.py loop for
loop (same quadrature, same term grouping); the test suite checks the two
paths agree to near machine precision.  numba is optional: import failure
leaves HAVE_KERNELS False and assembly falls back to the numpy path.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_KERNELS = True
except ImportError:  # pragma: no cover
    HAVE_KERNELS = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def hload_contrib(areas, grads, ce_x, ce_n, tensors, curls, gram, bary, weights,
                  s0, l1, l2, l3, l4, l5, a_c, b_c, c_c):
    """Per-element test-function contributions of the linearized midpoint forms.

    Returns (L, 3, m): local load of phi = psi_a R_m on each element.
    """
    nelem = ce_x.shape[0]
    msize = ce_x.shape[2]
    d = tensors.shape[1]
    npts = bary.shape[0]
    contrib = np.zeros((nelem, 3, msize))

    gx = np.empty((msize, d))
    gn = np.empty((msize, d))
    divx = np.empty(d)
    divn = np.empty(d)
    curlx = np.empty(d)
    curln = np.empty(d)
    cxq = np.empty(msize)
    cnq = np.empty(msize)
    mx = np.empty((d, d))
    mn = np.empty((d, d))
    u1 = np.empty(d)
    u2 = np.empty(d)
    u3 = np.empty(d)
    u4 = np.empty(d)
    vd = np.empty(d)
    vc = np.empty(d)
    z = np.empty((d, d))
    zacc = np.empty((3, msize))

    s13 = s0 / 3.0
    s23 = 2.0 * s0 / 3.0

    for l in range(nelem):
        for mm in range(msize):
            for k in range(d):
                sx = 0.0
                sn = 0.0
                for aa in range(3):
                    sx += grads[l, aa, k] * ce_x[l, aa, mm]
                    sn += grads[l, aa, k] * ce_n[l, aa, mm]
                gx[mm, k] = sx
                gn[mm, k] = sn
        for i in range(d):
            sdx = 0.0
            sdn = 0.0
            scx = 0.0
            scn = 0.0
            for mm in range(msize):
                for k in range(d):
                    sdx += tensors[mm, i, k] * gx[mm, k]
                    sdn += tensors[mm, i, k] * gn[mm, k]
                    scx += curls[mm, i, k] * gx[mm, k]
                    scn += curls[mm, i, k] * gn[mm, k]
            divx[i] = sdx
            divn[i] = sdn
            curlx[i] = scx
            curln[i] = scn
        grad2sum = 0.0
        for mm in range(msize):
            for nn in range(msize):
                gmn = gram[mm, nn]
                if gmn != 0.0:
                    for k in range(d):
                        grad2sum += gmn * (gx[mm, k] * gx[nn, k] + gn[mm, k] * gn[nn, k])

        for i in range(d):
            vd[i] = 0.0
            vc[i] = 0.0
        s5 = 0.0
        for aa in range(3):
            for mm in range(msize):
                zacc[aa, mm] = 0.0

        for p_ in range(npts):
            w = weights[p_]
            for mm in range(msize):
                sx = 0.0
                sn = 0.0
                for aa in range(3):
                    sx += bary[p_, aa] * ce_x[l, aa, mm]
                    sn += bary[p_, aa] * ce_n[l, aa, mm]
                cxq[mm] = sx
                cnq[mm] = sn
            for i in range(d):
                for j in range(d):
                    sx = 0.0
                    sn = 0.0
                    for mm in range(msize):
                        sx += cxq[mm] * tensors[mm, i, j]
                        sn += cnq[mm] * tensors[mm, i, j]
                    mx[i, j] = sx
                    mn[i, j] = sn
            # u_k = S(X) (div/curl X) + S(Qn) (div/curl Qn), S1 = s0/3 I + Q,
            # S2 = 2 s0/3 I - Q
            for i in range(d):
                t1 = s13 * divx[i] + s13 * divn[i]
                t2 = s13 * curlx[i] + s13 * curln[i]
                t3 = s23 * divx[i] + s23 * divn[i]
                t4 = s23 * curlx[i] + s23 * curln[i]
                for j in range(d):
                    t1 += mx[i, j] * divx[j] + mn[i, j] * divn[j]
                    t2 += mx[i, j] * curlx[j] + mn[i, j] * curln[j]
                    t3 -= mx[i, j] * divx[j] + mn[i, j] * divn[j]
                    t4 -= mx[i, j] * curlx[j] + mn[i, j] * curln[j]
                u1[i] = t1
                u2[i] = t2
                u3[i] = t3
                u4[i] = t4
            # gradient-type weights: S1sum^T u1, S2sum^T u3 (div), same for curl
            for i in range(d):
                sv = 2.0 * s13 * u1[i] + 0.0
                sw = 2.0 * s13 * u2[i]
                tv = 2.0 * s23 * u3[i]
                tw = 2.0 * s23 * u4[i]
                for j in range(d):
                    msum_ji = mx[j, i] + mn[j, i]
                    sv += msum_ji * u1[j]
                    sw += msum_ji * u2[j]
                    tv -= msum_ji * u3[j]
                    tw -= msum_ji * u4[j]
                vd[i] += w * (0.25 * l1 * sv + 0.25 * l3 * tv)
                vc[i] += w * (0.25 * l2 * sw + 0.25 * l4 * tw)
            scal = 0.0
            for i in range(d):
                for j in range(d):
                    scal += mx[i, j] * mx[i, j] + mn[i, j] * mn[i, j]
            s5 += w * scal
            coef = 0.25 * l5 * grad2sum + a_c + 0.5 * c_c * scal
            for i in range(d):
                for j in range(d):
                    dsum_j = divx[j] + divn[j]
                    csum_j = curlx[j] + curln[j]
                    val = (0.25 * (l1 * u1[i] - l3 * u3[i]) * dsum_j
                           + 0.25 * (l2 * u2[i] - l4 * u4[i]) * csum_j
                           + coef * (mx[i, j] + mn[i, j]))
                    prod = 0.0
                    for k in range(d):
                        prod += (mx[i, k] * mx[k, j] + mn[i, k] * mn[k, j]
                                 + mx[i, k] * mn[k, j])
                    z[i, j] = val - (2.0 * b_c / 3.0) * prod
            for mm in range(msize):
                zb = 0.0
                for i in range(d):
                    for j in range(d):
                        zb += z[i, j] * tensors[mm, i, j]
                for aa in range(3):
                    zacc[aa, mm] += w * bary[p_, aa] * zb

        area = areas[l]
        for mm in range(msize):
            for k in range(d):
                g1 = 0.0
                for i in range(d):
                    g1 += tensors[mm, i, k] * vd[i] + curls[mm, i, k] * vc[i]
                g5 = 0.0
                for nn in range(msize):
                    g5 += gram[mm, nn] * (gx[nn, k] + gn[nn, k])
                gother = g1 + 0.25 * l5 * s5 * g5
                for aa in range(3):
                    contrib[l, aa, mm] += gother * grads[l, aa, k]
        for aa in range(3):
            for mm in range(msize):
                contrib[l, aa, mm] = area * (contrib[l, aa, mm] + zacc[aa, mm])
    return contrib


@njit(cache=True)
def energy_terms(areas, grads, ce, tensors, curls, gram, bary, weights,
                 s0, l1, l2, l3, l4, l5, a_c, b_c, c_c):
    """Six-term energy of a P1 coefficient field; returns a length-6 array."""
    nelem = ce.shape[0]
    msize = ce.shape[2]
    d = tensors.shape[1]
    npts = bary.shape[0]
    f = np.zeros(6)

    g = np.empty((msize, d))
    div = np.empty(d)
    curl = np.empty(d)
    cq = np.empty(msize)
    mq = np.empty((d, d))
    s13 = s0 / 3.0
    s23 = 2.0 * s0 / 3.0

    for l in range(nelem):
        for mm in range(msize):
            for k in range(d):
                s = 0.0
                for aa in range(3):
                    s += grads[l, aa, k] * ce[l, aa, mm]
                g[mm, k] = s
        for i in range(d):
            sd = 0.0
            sc = 0.0
            for mm in range(msize):
                for k in range(d):
                    sd += tensors[mm, i, k] * g[mm, k]
                    sc += curls[mm, i, k] * g[mm, k]
            div[i] = sd
            curl[i] = sc
        grad2 = 0.0
        for mm in range(msize):
            for nn in range(msize):
                gmn = gram[mm, nn]
                if gmn != 0.0:
                    for k in range(d):
                        grad2 += gmn * g[mm, k] * g[nn, k]

        area = areas[l]
        for p_ in range(npts):
            w = weights[p_] * area
            for mm in range(msize):
                s = 0.0
                for aa in range(3):
                    s += bary[p_, aa] * ce[l, aa, mm]
                cq[mm] = s
            for i in range(d):
                for j in range(d):
                    s = 0.0
                    for mm in range(msize):
                        s += cq[mm] * tensors[mm, i, j]
                    mq[i, j] = s
            e1 = 0.0
            e2 = 0.0
            e3 = 0.0
            e4 = 0.0
            for i in range(d):
                t1 = s13 * div[i]
                t2 = s13 * curl[i]
                t3 = s23 * div[i]
                t4 = s23 * curl[i]
                for j in range(d):
                    t1 += mq[i, j] * div[j]
                    t2 += mq[i, j] * curl[j]
                    t3 -= mq[i, j] * div[j]
                    t4 -= mq[i, j] * curl[j]
                e1 += t1 * t1
                e2 += t2 * t2
                e3 += t3 * t3
                e4 += t4 * t4
            tr2 = 0.0
            tr3 = 0.0
            for i in range(d):
                for j in range(d):
                    tr2 += mq[i, j] * mq[i, j]
                    for k in range(d):
                        tr3 += mq[i, j] * mq[j, k] * mq[k, i]
            f[0] += 0.5 * l1 * w * e1
            f[1] += 0.5 * l2 * w * e2
            f[2] += 0.5 * l3 * w * e3
            f[3] += 0.5 * l4 * w * e4
            f[4] += 0.5 * l5 * w * tr2 * grad2
            f[5] += w * (a_c * tr2 - (2.0 * b_c / 3.0) * tr3 + 0.5 * c_c * tr2 * tr2)
    return f
