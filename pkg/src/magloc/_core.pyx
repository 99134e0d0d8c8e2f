# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Monte Carlo kernel; same contract as ``magloc._pycore.simulate_block``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, sin, cos, fabs, isfinite, NAN, M_PI

cnp.import_array()


cdef inline double _clip(double v, double lim) noexcept nogil:
    if v > lim:
        return lim
    if v < -lim:
        return -lim
    return v


def simulate_block(positions, fields, uniforms, plan):
    cdef const double[:, ::1] pos = np.ascontiguousarray(positions, dtype=np.float64)
    cdef const double[:, :, ::1] fld = np.ascontiguousarray(fields, dtype=np.float64)
    cdef const double[:, :, ::1] uni = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef const double[::1] cur = np.ascontiguousarray(plan.currents, dtype=np.float64)
    cdef const double[::1] bounds = np.ascontiguousarray(plan.bounds, dtype=np.float64)
    cdef const cnp.int64_t[::1] perm = np.ascontiguousarray(plan.perm, dtype=np.int64)
    cdef const cnp.int64_t[::1] tri = np.ascontiguousarray(plan.tri_index, dtype=np.int64)
    cdef const double[::1] corner = np.ascontiguousarray(plan.corner, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] fidx = np.ascontiguousarray(plan.fam_idx, dtype=np.int64)
    cdef const cnp.int64_t[::1] fk = np.ascontiguousarray(plan.fam_k, dtype=np.int64)
    cdef const double[:, :, ::1] fpinv = np.ascontiguousarray(plan.fam_pinv, dtype=np.float64)
    cdef const double[:, ::1] fconst = np.ascontiguousarray(plan.fam_const, dtype=np.float64)
    cdef const double[::1] fw = np.ascontiguousarray(plan.fam_weight, dtype=np.float64)
    cdef const cnp.int64_t[:, ::1] plane = np.ascontiguousarray(plan.plane, dtype=np.int64)

    cdef Py_ssize_t n = uni.shape[0], runs = uni.shape[1], nw = fld.shape[1]
    cdef int mode = plan.mode
    cdef int basis = plan.noise_basis
    cdef double mu = plan.mu, rel = plan.rel_error, rmax = plan.range_max

    means_arr = np.zeros((n, 4))
    sat_arr = np.zeros(n, dtype=np.int64)
    fail_arr = np.zeros(n, dtype=np.int64)
    cdef double[:, ::1] means = means_arr
    cdef cnp.int64_t[::1] satc = sat_arr
    cdef cnp.int64_t[::1] failc = fail_arr

    dist_arr = np.empty(max(nw, 1))
    cdef double[::1] dist = dist_arr

    cdef Py_ssize_t i, r, w, j, f, k, off
    cdef double u1, u2, u3, a, b, qw, qx, qy, qz
    cdef double m00, m01, m02, m10, m11, m12, m20, m21, m22
    cdef double e[3]
    cdef double v0, v1, v2, s0, s1, s2, mag, x2, y2, z2, d0, rhs, ca, cb, wgt
    cdef double est[3]
    cdef double wsum[3]
    cdef double ex, ey, ez, perr
    cdef double acc0, acc1, acc2, acc3
    cdef Py_ssize_t count
    cdef bint sat, bad
    cdef double two_pi = 2.0 * M_PI

    with nogil:
        for i in range(n):
            acc0 = 0.0
            acc1 = 0.0
            acc2 = 0.0
            acc3 = 0.0
            count = 0
            for r in range(runs):
                u1 = uni[i, r, 0]
                u2 = uni[i, r, 1]
                u3 = uni[i, r, 2]
                a = sqrt(1.0 - u1)
                b = sqrt(u1)
                qw = b * cos(two_pi * u3)
                qx = a * sin(two_pi * u2)
                qy = a * cos(two_pi * u2)
                qz = b * sin(two_pi * u3)
                m00 = 1 - 2 * (qy * qy + qz * qz)
                m01 = 2 * (qx * qy - qz * qw)
                m02 = 2 * (qx * qz + qy * qw)
                m10 = 2 * (qx * qy + qz * qw)
                m11 = 1 - 2 * (qx * qx + qz * qz)
                m12 = 2 * (qy * qz - qx * qw)
                m20 = 2 * (qx * qz - qy * qw)
                m21 = 2 * (qy * qz + qx * qw)
                m22 = 1 - 2 * (qx * qx + qy * qy)
                for j in range(3):
                    e[perm[j]] = bounds[j] * (2.0 * uni[i, r, 3 + j] - 1.0)

                sat = False
                bad = False
                for w in range(nw):
                    v0 = fld[i, w, 0] + e[0]
                    v1 = fld[i, w, 1] + e[1]
                    v2 = fld[i, w, 2] + e[2]
                    s0 = v0 * m00 + v1 * m10 + v2 * m20
                    s1 = v0 * m01 + v1 * m11 + v2 * m21
                    s2 = v0 * m02 + v1 * m12 + v2 * m22
                    if fabs(s0) > rmax or fabs(s1) > rmax or fabs(s2) > rmax:
                        sat = True
                    off = 6 + 3 * w
                    if basis == 0:
                        s0 = _clip(s0 + rel * fabs(s0) * (2.0 * uni[i, r, off] - 1.0), rmax)
                        s1 = _clip(s1 + rel * fabs(s1) * (2.0 * uni[i, r, off + 1] - 1.0), rmax)
                        s2 = _clip(s2 + rel * fabs(s2) * (2.0 * uni[i, r, off + 2] - 1.0), rmax)
                        mag = sqrt(s0 * s0 + s1 * s1 + s2 * s2)
                    else:
                        s0 = _clip(s0, rmax)
                        s1 = _clip(s1, rmax)
                        s2 = _clip(s2, rmax)
                        mag = sqrt(s0 * s0 + s1 * s1 + s2 * s2)
                        mag = mag * (1.0 + rel * (2.0 * uni[i, r, off] - 1.0))
                    if not (mag > 0) or not isfinite(mag):
                        bad = True
                    dist[w] = mu * cur[w] / two_pi / mag
                if sat:
                    satc[i] += 1
                if bad:
                    continue

                if mode == 0:
                    x2 = dist[tri[0]] * dist[tri[0]]
                    y2 = dist[tri[1]] * dist[tri[1]]
                    z2 = dist[tri[2]] * dist[tri[2]]
                    v0 = 0.5 * (z2 + y2 - x2)
                    v1 = 0.5 * (x2 + z2 - y2)
                    v2 = 0.5 * (x2 + y2 - z2)
                    est[0] = (sqrt(v0) if v0 > 0 else 0.0) + corner[0]
                    est[1] = (sqrt(v1) if v1 > 0 else 0.0) + corner[1]
                    est[2] = (sqrt(v2) if v2 > 0 else 0.0) + corner[2]
                else:
                    for j in range(3):
                        est[j] = 0.0
                        wsum[j] = 0.0
                    for f in range(3):
                        if fk[f] == 0:
                            continue
                        d0 = dist[fidx[f, 0]]
                        d0 = d0 * d0
                        ca = 0.0
                        cb = 0.0
                        for k in range(fk[f] - 1):
                            rhs = d0 - dist[fidx[f, k + 1]] * dist[fidx[f, k + 1]] + fconst[f, k]
                            ca = ca + rhs * fpinv[f, 0, k]
                            cb = cb + rhs * fpinv[f, 1, k]
                        wgt = fw[f]
                        est[plane[f, 0]] += wgt * ca
                        est[plane[f, 1]] += wgt * cb
                        wsum[plane[f, 0]] += wgt
                        wsum[plane[f, 1]] += wgt
                    for j in range(3):
                        est[j] = est[j] / wsum[j]

                ex = est[0] - pos[i, 0]
                ey = est[1] - pos[i, 1]
                ez = est[2] - pos[i, 2]
                perr = sqrt(ex * ex + ey * ey + ez * ez)
                if not isfinite(perr):
                    continue
                acc0 += perr
                acc1 += fabs(ex)
                acc2 += fabs(ey)
                acc3 += fabs(ez)
                count += 1

            failc[i] = runs - count
            if count > 0:
                means[i, 0] = acc0 / count
                means[i, 1] = acc1 / count
                means[i, 2] = acc2 / count
                means[i, 3] = acc3 / count
            else:
                means[i, 0] = NAN
                means[i, 1] = NAN
                means[i, 2] = NAN
                means[i, 3] = NAN

    return means_arr, sat_arr, fail_arr
