# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Mirrors stereokit._pykernels."""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()


def warp_rows(const double[:, :, ::1] src, const double[:, ::1] disp, double step):
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], c = src.shape[2]
    out_arr = np.zeros((h, w, c), dtype=np.float64)
    valid_arr = np.zeros((h, w), dtype=np.bool_)
    cdef double[:, :, ::1] out = out_arr
    cdef cnp.npy_bool[:, ::1] valid = valid_arr
    cdef Py_ssize_t y, x, ch, i0, i1
    cdef double xs, x0, a, wmax = <double>(w - 1)
    for y in range(h):
        for x in range(w):
            xs = <double>x + step * disp[y, x]
            if xs < 0.0 or xs > wmax:
                continue
            valid[y, x] = 1
            x0 = floor(xs)
            a = xs - x0
            i0 = <Py_ssize_t>x0
            i1 = i0 + 1
            if i1 > w - 1:
                i1 = w - 1
            for ch in range(c):
                out[y, x, ch] = src[y, i0, ch] * (1.0 - a) + src[y, i1, ch] * a
    return out_arr, valid_arr


cdef inline void _inv3(double* m, double* r) noexcept nogil:
    cdef double det
    cdef int i
    r[0] = m[4] * m[8] - m[5] * m[7]
    r[1] = m[2] * m[7] - m[1] * m[8]
    r[2] = m[1] * m[5] - m[2] * m[4]
    r[3] = m[5] * m[6] - m[3] * m[8]
    r[4] = m[0] * m[8] - m[2] * m[6]
    r[5] = m[2] * m[3] - m[0] * m[5]
    r[6] = m[3] * m[7] - m[4] * m[6]
    r[7] = m[1] * m[6] - m[0] * m[7]
    r[8] = m[0] * m[4] - m[1] * m[3]
    det = m[0] * r[0] + m[1] * r[3] + m[2] * r[6]
    for i in range(9):
        r[i] = r[i] / det


def laplacian_coo(const double[:, :, ::1] guide, int radius, double eps):
    cdef Py_ssize_t h = guide.shape[0], w = guide.shape[1], c = guide.shape[2]
    if c != 1 and c != 3:
        raise ValueError("guide must have 1 or 3 channels")
    cdef int side = 2 * radius + 1
    cdef int n = side * side
    cdef Py_ssize_t nwin = (h - side + 1) * (w - side + 1)
    rows_arr = np.empty(nwin * n * n, dtype=np.int64)
    cols_arr = np.empty(nwin * n * n, dtype=np.int64)
    vals_arr = np.empty(nwin * n * n, dtype=np.float64)
    cdef cnp.int64_t[::1] rows = rows_arr
    cdef cnp.int64_t[::1] cols = cols_arr
    cdef double[::1] vals = vals_arr

    idx_arr = np.empty(n, dtype=np.int64)
    dev_arr = np.empty((n, 3), dtype=np.float64)
    proj_arr = np.empty((n, 3), dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[:, ::1] dev = dev_arr
    cdef double[:, ::1] proj = proj_arr
    cdef double mu[3]
    cdef double cov[9]
    cdef double inv[9]
    cdef double q, inv1
    cdef Py_ssize_t cy, cx, dy, dx, i, j, a, b, p, e = 0
    cdef double dn = <double>n

    for cy in range(radius, h - radius):
        for cx in range(radius, w - radius):
            p = 0
            for dy in range(-radius, radius + 1):
                for dx in range(-radius, radius + 1):
                    idx[p] = (cy + dy) * w + (cx + dx)
                    p += 1
            for a in range(c):
                mu[a] = 0.0
                for i in range(n):
                    mu[a] += guide[(idx[i] // w), (idx[i] % w), a]
                mu[a] /= dn
            for i in range(n):
                for a in range(c):
                    dev[i, a] = guide[(idx[i] // w), (idx[i] % w), a] - mu[a]
            if c == 1:
                q = 0.0
                for i in range(n):
                    q += dev[i, 0] * dev[i, 0]
                inv1 = 1.0 / (q / dn + eps / dn)
                for i in range(n):
                    proj[i, 0] = dev[i, 0] * inv1
            else:
                for a in range(3):
                    for b in range(3):
                        q = 0.0
                        for i in range(n):
                            q += dev[i, a] * dev[i, b]
                        cov[a * 3 + b] = q / dn
                    cov[a * 3 + a] += eps / dn
                _inv3(cov, inv)
                for i in range(n):
                    for a in range(3):
                        proj[i, a] = (dev[i, 0] * inv[a] + dev[i, 1] * inv[3 + a]
                                      + dev[i, 2] * inv[6 + a])
            for i in range(n):
                for j in range(n):
                    q = 0.0
                    for a in range(c):
                        q += proj[i, a] * dev[j, a]
                    rows[e] = idx[i]
                    cols[e] = idx[j]
                    vals[e] = (1.0 if i == j else 0.0) - (1.0 + q) / dn
                    e += 1
    return rows_arr, cols_arr, vals_arr


def autocorr(const double[:, :, ::1] feats, int k):
    cdef Py_ssize_t c = feats.shape[0], h = feats.shape[1], w = feats.shape[2]
    cdef int r = k // 2
    out_arr = np.zeros((k * k, h, w), dtype=np.float64)
    norm_arr = np.zeros((h, w), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, ::1] norm = norm_arr
    cdef Py_ssize_t y, x, ch, o
    cdef int dy, dx
    cdef double s
    for y in range(h):
        for x in range(w):
            s = 0.0
            for ch in range(c):
                s += feats[ch, y, x] * feats[ch, y, x]
            norm[y, x] = sqrt(s)
    # accumulate dot products channel by channel over contiguous rows
    cdef Py_ssize_t ys, ye, xs, xe
    o = 0
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            ys = max(0, -dy)
            ye = min(h, h - dy)
            xs = max(0, -dx)
            xe = min(w, w - dx)
            for ch in range(c):
                for y in range(ys, ye):
                    for x in range(xs, xe):
                        out[o, y, x] += feats[ch, y, x] * feats[ch, y + dy, x + dx]
            for y in range(ys, ye):
                for x in range(xs, xe):
                    out[o, y, x] = out[o, y, x] / (norm[y, x] * norm[y + dy, x + dx] + 1e-8)
            o += 1
    return out_arr
