"""Compiled inner loops. All kernels are sequential; only the conv kernels use fastmath (deterministic per machine)."""

import numba
import numpy as np


@numba.njit(cache=True)
def masked_scale(x, bits, threshold, scale, out):
    xf = x.ravel()
    bf = bits.ravel()
    of = out.ravel()
    for i in range(xf.size):
        of[i] = xf[i] * scale if bf[i] >= threshold else 0.0
    return out


@numba.njit(cache=True)
def relu_grad(g, x, out):
    gf = g.ravel()
    xf = x.ravel()
    of = out.ravel()
    for i in range(gf.size):
        of[i] = gf[i] if xf[i] > 0.0 else 0.0
    return out


@numba.njit(cache=True)
def adam_update(p, g, m, v, lr, b1, b2, bc1, bc2, eps):
    pf = p.ravel()
    gf = g.ravel()
    mf = m.ravel()
    vf = v.ravel()
    for i in range(pf.size):
        gi = gf[i]
        mi = b1 * mf[i] + (1.0 - b1) * gi
        vi = b2 * vf[i] + (1.0 - b2) * gi * gi
        mf[i] = mi
        vf[i] = vi
        pf[i] -= lr * (mi / bc1) / (np.sqrt(vi / bc2) + eps)


@numba.njit(cache=True)
def conv_input_grad(gp, width, c_in, out):
    # gp: (B, Lout, width*c_in) gradient wrt patches; scatter back onto (B, L, c_in)
    nb, lout, _ = gp.shape
    out[:] = 0.0
    for b in range(nb):
        for t in range(lout):
            for j in range(width):
                for c in range(c_in):
                    out[b, t + j, c] += gp[b, t, j * c_in + c]
    return out


@numba.njit(cache=True)
def dtw_cost(a, b):
    n, m = a.shape[0], b.shape[0]
    acc = np.empty((n + 1, m + 1))
    acc[:, :] = np.inf
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        ai = a[i - 1]
        for j in range(1, m + 1):
            d = ai - b[j - 1]
            best = acc[i - 1, j - 1]
            if acc[i - 1, j] < best:
                best = acc[i - 1, j]
            if acc[i, j - 1] < best:
                best = acc[i, j - 1]
            acc[i, j] = d * d + best
    return acc


@numba.njit(cache=True)
def dtw_distance_sq(a, b):
    return dtw_cost(a, b)[a.shape[0], b.shape[0]]


@numba.njit(cache=True)
def dtw_to_many(x, centroids, out):
    for c in range(centroids.shape[0]):
        out[c] = dtw_distance_sq(x, centroids[c])
    return out


@numba.njit(cache=True)
def dtw_all(rows, centroids):
    out = np.empty((rows.shape[0], centroids.shape[0]))
    for i in range(rows.shape[0]):
        for c in range(centroids.shape[0]):
            out[i, c] = dtw_distance_sq(rows[i], centroids[c])
    return out


@numba.njit(cache=True)
def dba_accumulate(center, members, sums, counts):
    """Add every member's DTW-aligned values onto the barycenter indices."""
    n = center.shape[0]
    for r in range(members.shape[0]):
        seq = members[r]
        acc = dtw_cost(center, seq)
        i, j = n, seq.shape[0]
        while i > 0 and j > 0:
            sums[i - 1] += seq[j - 1]
            counts[i - 1] += 1
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1


@numba.njit(cache=True, inline="always")
def _mix64(seed, idx):
    # splitmix64 finaliser on a counter
    z = (seed + numba.uint64(idx) * numba.uint64(0x9E3779B97F4A7C15)) & numba.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> numba.uint64(30))) * numba.uint64(0xBF58476D1CE4E5B9)) & numba.uint64(0xFFFFFFFFFFFFFFFF)
    z = ((z ^ (z >> numba.uint64(27))) * numba.uint64(0x94D049BB133111EB)) & numba.uint64(0xFFFFFFFFFFFFFFFF)
    return z ^ (z >> numba.uint64(31))


@numba.njit(cache=True, inline="always")
def _lane16(word, idx):
    # element idx uses 16-bit lane idx % 4 of hash word idx // 4
    return numba.int64((word >> numba.uint64(16 * (idx & 3))) & numba.uint64(0xFFFF))


@numba.njit(cache=True)
def dropout_bits(seed, n):
    out = np.empty(n, dtype=np.uint16)
    s = numba.uint64(seed)
    word = numba.uint64(0)
    for i in range(n):
        if i & 3 == 0:
            word = _mix64(s, i >> 2)
        out[i] = _lane16(word, i)
    return out


@numba.njit(cache=True, fastmath=True)
def conv_relu_dropout_forward(x, w, bias, seed, threshold, scale, out):
    """relu(conv1d(x) + bias), then inverted dropout when threshold > 0.

    x: (B, L, C_in); w: (k, C_in, C_out); out: (B, L-k+1, C_out), C-contiguous.
    """
    nb, _, c_in = x.shape
    width, _, c_out = w.shape
    lout = out.shape[1]
    for b in range(nb):
        for t in range(lout):
            for co in range(c_out):
                out[b, t, co] = bias[co]
        for j in range(width):
            for ci in range(c_in):
                for t in range(lout):
                    xv = x[b, t + j, ci]
                    for co in range(c_out):
                        out[b, t, co] += xv * w[j, ci, co]
    flat = out.reshape(-1)
    n = flat.shape[0]
    if threshold <= 0:
        for i in range(n):
            if flat[i] < 0.0:
                flat[i] = 0.0
        return out
    s = numba.uint64(seed)
    thr = numba.uint64(threshold)
    for q in range((n + 3) >> 2):
        word = _mix64(s, q)
        for lane in range(4):
            i = 4 * q + lane
            if i >= n:
                break
            bits = (word >> numba.uint64(16 * lane)) & numba.uint64(0xFFFF)
            v = flat[i]
            flat[i] = v * scale if (v > 0.0 and bits >= thr) else 0.0
    return out


@numba.njit(cache=True, fastmath=True)
def conv_relu_dropout_backward(g, h, x, w, scale, need_params, need_input, dw, db, dx):
    """Backward of the fused block. Units with h > 0 passed both relu and dropout."""
    nb, lout, c_out = g.shape
    width, c_in, _ = w.shape
    gz = np.empty((lout, c_out))
    if need_params:
        dw[:] = 0.0
        db[:] = 0.0
    if need_input:
        dx[:] = 0.0
    for b in range(nb):
        for t in range(lout):
            for co in range(c_out):
                gz[t, co] = g[b, t, co] * scale if h[b, t, co] > 0.0 else 0.0
        if need_params:
            for t in range(lout):
                for co in range(c_out):
                    db[co] += gz[t, co]
            for j in range(width):
                for ci in range(c_in):
                    for t in range(lout):
                        xv = x[b, t + j, ci]
                        for co in range(c_out):
                            dw[j, ci, co] += gz[t, co] * xv
        if need_input:
            for j in range(width):
                for ci in range(c_in):
                    for t in range(lout):
                        acc = 0.0
                        for co in range(c_out):
                            acc += gz[t, co] * w[j, ci, co]
                        dx[b, t + j, ci] += acc
