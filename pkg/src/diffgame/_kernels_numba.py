"""numba twins of the numpy kernels; compiled lazily on first call."""

import numpy as np
from numba import njit

# numpy error model: the python one adds zero-division checks that cost ~5x
_JIT = dict(cache=True, error_model="numpy")


@njit(**_JIT)
def _strides(res):
    n = res.shape[0]
    out = np.ones(n, dtype=np.int64)
    for d in range(n - 2, -1, -1):
        out[d] = out[d + 1] * res[d + 1]
    return out


@njit(**_JIT)
def _locate(y, lo, h, n_nodes):
    s = (y - lo) / h
    top = n_nodes - 1.0
    if s < 0.0:
        s = 0.0
    elif s > top:
        s = top
    b = int(s)
    if b > n_nodes - 2:
        b = n_nodes - 2
    return b, s - b


# Dimension-specialized interpolants. A single kernel branching on the
# dimension per point is ~20x slower, so the wrappers dispatch on it instead.
@njit(**_JIT)
def _at1(values, lo, h, res, y0):
    i, a = _locate(y0, lo[0], h[0], res[0])
    return (1.0 - a) * values[i] + a * values[i + 1]


@njit(**_JIT)
def _at2(values, lo, h, res, y0, y1):
    i, a = _locate(y0, lo[0], h[0], res[0])
    j, b = _locate(y1, lo[1], h[1], res[1])
    s0 = res[1]
    k = i * s0 + j
    return (1.0 - a) * ((1.0 - b) * values[k] + b * values[k + 1]) + a * (
        (1.0 - b) * values[k + s0] + b * values[k + s0 + 1]
    )


@njit(**_JIT)
def _at3(values, lo, h, res, y0, y1, y2):
    i, a = _locate(y0, lo[0], h[0], res[0])
    j, b = _locate(y1, lo[1], h[1], res[1])
    l, c = _locate(y2, lo[2], h[2], res[2])
    s1 = res[2]
    s0 = res[1] * s1
    k = i * s0 + j * s1 + l
    lo_face = (1.0 - b) * ((1.0 - c) * values[k] + c * values[k + 1]) + b * (
        (1.0 - c) * values[k + s1] + c * values[k + s1 + 1]
    )
    k += s0
    hi_face = (1.0 - b) * ((1.0 - c) * values[k] + c * values[k + 1]) + b * (
        (1.0 - c) * values[k + s1] + c * values[k + s1 + 1]
    )
    return (1.0 - a) * lo_face + a * hi_face


@njit(**_JIT)
def _at_n(values, lo, h, res, strides, y, base, frac):
    n = y.shape[0]
    for d in range(n):
        b, a = _locate(y[d], lo[d], h[d], res[d])
        base[d] = b
        frac[d] = a
    acc = 0.0
    for corner in range(1 << n):
        idx = 0
        w = 1.0
        for d in range(n):
            if (corner >> d) & 1:
                idx += (base[d] + 1) * strides[d]
                w *= frac[d]
            else:
                idx += base[d] * strides[d]
                w *= 1.0 - frac[d]
        acc += w * values[idx]
    return acc


@njit(**_JIT)
def _interp1(values, lo, hi, res, flat):
    h = (hi - lo) / (res - 1)
    out = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        out[i] = _at1(values, lo, h, res, flat[i, 0])
    return out


@njit(**_JIT)
def _interp2(values, lo, hi, res, flat):
    h = (hi - lo) / (res - 1)
    out = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        out[i] = _at2(values, lo, h, res, flat[i, 0], flat[i, 1])
    return out


@njit(**_JIT)
def _interp3(values, lo, hi, res, flat):
    h = (hi - lo) / (res - 1)
    out = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        out[i] = _at3(values, lo, h, res, flat[i, 0], flat[i, 1], flat[i, 2])
    return out


@njit(**_JIT)
def _interp_n(values, lo, hi, res, flat):
    n = flat.shape[1]
    h = (hi - lo) / (res - 1)
    strides = _strides(res)
    base = np.empty(n, dtype=np.int64)
    frac = np.empty(n)
    y = np.empty(n)
    out = np.empty(flat.shape[0])
    for i in range(flat.shape[0]):
        for d in range(n):
            y[d] = flat[i, d]
        out[i] = _at_n(values, lo, h, res, strides, y, base, frac)
    return out


_INTERP = {1: _interp1, 2: _interp2, 3: _interp3}


def interp(values, lo, hi, res, points):
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[-1]
    flat = np.ascontiguousarray(points.reshape(-1, n))
    kernel = _INTERP.get(n, _interp_n)
    out = kernel(
        np.ascontiguousarray(values, dtype=np.float64),
        np.asarray(lo, dtype=np.float64),
        np.asarray(hi, dtype=np.float64),
        np.asarray(res, dtype=np.int64),
        flat,
    )
    return out.reshape(points.shape[:-1])


@njit(**_JIT)
def _reduce(q, mode):
    nu, nv = q.shape
    if mode == 0:
        best = -np.inf
        for k in range(nu):
            worst = np.inf
            for l in range(nv):
                if q[k, l] < worst:
                    worst = q[k, l]
            if worst > best:
                best = worst
    else:
        best = np.inf
        for l in range(nv):
            worst = -np.inf
            for k in range(nu):
                if q[k, l] > worst:
                    worst = q[k, l]
            if worst < best:
                best = worst
    return best


@njit(**_JIT)
def _clamp(y, lo, hi, tol):
    """Clamped coordinate and whether it left the tolerance band."""
    out = y < lo - tol or y > hi + tol
    if y < lo:
        y = lo
    elif y > hi:
        y = hi
    return y, out


@njit(**_JIT)
def _backup1(values, lo, hi, res, points, disp, mode, tol):
    npts, nu, nv, _ = disp.shape
    h = (hi - lo) / (res - 1)
    q = np.empty((nu, nv))
    vals = np.empty(npts)
    outside = np.zeros(npts, dtype=np.bool_)
    for p in range(npts):
        flag = False
        for k in range(nu):
            for l in range(nv):
                y0, o0 = _clamp(points[p, 0] + disp[p, k, l, 0], lo[0], hi[0], tol[0])
                flag = flag or o0
                q[k, l] = _at1(values, lo, h, res, y0)
        outside[p] = flag
        vals[p] = _reduce(q, mode)
    return vals, outside


@njit(**_JIT)
def _backup2(values, lo, hi, res, points, disp, mode, tol):
    npts, nu, nv, _ = disp.shape
    h = (hi - lo) / (res - 1)
    q = np.empty((nu, nv))
    vals = np.empty(npts)
    outside = np.zeros(npts, dtype=np.bool_)
    for p in range(npts):
        flag = False
        for k in range(nu):
            for l in range(nv):
                y0, o0 = _clamp(points[p, 0] + disp[p, k, l, 0], lo[0], hi[0], tol[0])
                y1, o1 = _clamp(points[p, 1] + disp[p, k, l, 1], lo[1], hi[1], tol[1])
                flag = flag or o0 or o1
                q[k, l] = _at2(values, lo, h, res, y0, y1)
        outside[p] = flag
        vals[p] = _reduce(q, mode)
    return vals, outside


@njit(**_JIT)
def _backup3(values, lo, hi, res, points, disp, mode, tol):
    npts, nu, nv, _ = disp.shape
    h = (hi - lo) / (res - 1)
    q = np.empty((nu, nv))
    vals = np.empty(npts)
    outside = np.zeros(npts, dtype=np.bool_)
    for p in range(npts):
        flag = False
        for k in range(nu):
            for l in range(nv):
                y0, o0 = _clamp(points[p, 0] + disp[p, k, l, 0], lo[0], hi[0], tol[0])
                y1, o1 = _clamp(points[p, 1] + disp[p, k, l, 1], lo[1], hi[1], tol[1])
                y2, o2 = _clamp(points[p, 2] + disp[p, k, l, 2], lo[2], hi[2], tol[2])
                flag = flag or o0 or o1 or o2
                q[k, l] = _at3(values, lo, h, res, y0, y1, y2)
        outside[p] = flag
        vals[p] = _reduce(q, mode)
    return vals, outside


@njit(**_JIT)
def _backup_n(values, lo, hi, res, points, disp, mode, tol):
    npts, nu, nv, n = disp.shape
    h = (hi - lo) / (res - 1)
    strides = _strides(res)
    base = np.empty(n, dtype=np.int64)
    frac = np.empty(n)
    y = np.empty(n)
    q = np.empty((nu, nv))
    vals = np.empty(npts)
    outside = np.zeros(npts, dtype=np.bool_)
    for p in range(npts):
        flag = False
        for k in range(nu):
            for l in range(nv):
                for d in range(n):
                    yd, od = _clamp(points[p, d] + disp[p, k, l, d], lo[d], hi[d], tol[d])
                    flag = flag or od
                    y[d] = yd
                q[k, l] = _at_n(values, lo, h, res, strides, y, base, frac)
        outside[p] = flag
        vals[p] = _reduce(q, mode)
    return vals, outside


_BACKUP = {1: _backup1, 2: _backup2, 3: _backup3}


def backup(values, lo, hi, res, points, disp, mode, tol):
    lo = np.asarray(lo, dtype=np.float64)
    tol = np.broadcast_to(np.asarray(tol, dtype=np.float64), lo.shape).copy()
    kernel = _BACKUP.get(lo.shape[0], _backup_n)
    return kernel(
        np.ascontiguousarray(values, dtype=np.float64),
        lo,
        np.asarray(hi, dtype=np.float64),
        np.asarray(res, dtype=np.int64),
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(disp, dtype=np.float64),
        int(mode),
        tol,
    )


@njit(**_JIT)
def _saddle(payoff):
    nb, nu, nv = payoff.shape
    h_minus = np.empty(nb)
    h_plus = np.empty(nb)
    u_star = np.empty(nb, dtype=np.int64)
    v_star = np.empty(nb, dtype=np.int64)
    for b in range(nb):
        best = -np.inf
        arg = 0
        for k in range(nu):
            m = np.inf
            for l in range(nv):
                if payoff[b, k, l] < m:
                    m = payoff[b, k, l]
            if m > best:
                best = m
                arg = k
        h_minus[b] = best
        u_star[b] = arg
        best = np.inf
        arg = 0
        for l in range(nv):
            m = -np.inf
            for k in range(nu):
                if payoff[b, k, l] > m:
                    m = payoff[b, k, l]
            if m < best:
                best = m
                arg = l
        h_plus[b] = best
        v_star[b] = arg
    return h_minus, h_plus, u_star, v_star


def saddle(payoff):
    return _saddle(np.ascontiguousarray(payoff, dtype=np.float64))


@njit(**_JIT)
def _candidates(values, lo, hi, res, level):
    n = res.shape[0]
    total = values.shape[0]
    h = (hi - lo) / (res - 1)
    strides = _strides(res)
    out = np.empty((total * (n + 1), n))
    count = 0
    coord = np.empty(n, dtype=np.int64)
    for i in range(total):
        rem = i
        for d in range(n):
            coord[d] = rem // strides[d]
            rem -= coord[d] * strides[d]
        a = values[i]
        if a <= level:
            for d in range(n):
                out[count, d] = lo[d] + coord[d] * h[d]
            count += 1
        for d in range(n):
            if coord[d] + 1 >= res[d]:
                continue
            b = values[i + strides[d]]
            if (a <= level) != (b <= level):
                fr = (level - a) / (b - a)
                for e in range(n):
                    out[count, e] = lo[e] + coord[e] * h[e]
                out[count, d] += fr * h[d]
                count += 1
    return out[:count].copy()


def levelset_candidates(values, lo, hi, res, level):
    return _candidates(values, lo, hi, np.asarray(res, dtype=np.int64), float(level))


@njit(**_JIT)
def _nearest(candidates, queries):
    nq = queries.shape[0]
    n = queries.shape[1]
    idx = np.empty(nq, dtype=np.int64)
    dist = np.empty(nq)
    for q in range(nq):
        best = np.inf
        arg = 0
        for m in range(candidates.shape[0]):
            d2 = 0.0
            for d in range(n):
                diff = queries[q, d] - candidates[m, d]
                d2 += diff * diff
            if d2 < best:
                best = d2
                arg = m
        idx[q] = arg
        dist[q] = np.sqrt(best)
    return idx, dist


def nearest(candidates, queries):
    return _nearest(np.ascontiguousarray(candidates), np.ascontiguousarray(queries))
