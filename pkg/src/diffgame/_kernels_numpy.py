"""Pure-numpy reference kernels.

Every function here has a twin in ``_kernels_numba`` with the same signature
and the same tie-breaking (first index wins).
"""

import numpy as np


def _strides(res):
    res = np.asarray(res, dtype=np.int64)
    out = np.ones(len(res), dtype=np.int64)
    for d in range(len(res) - 2, -1, -1):
        out[d] = out[d + 1] * res[d + 1]
    return out


def interp(values, lo, hi, res, points):
    """Multilinear interpolation of node ``values`` (C-order flat) at ``points``.

    Points outside the box are clamped onto it.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[-1]
    flat = points.reshape(-1, n)
    h = (hi - lo) / (res - 1)
    s = np.clip((flat - lo) / h, 0.0, res - 1.0)
    base = np.minimum(np.floor(s).astype(np.int64), res - 2)
    frac = s - base
    strides = _strides(res)
    out = np.zeros(flat.shape[0])
    for corner in range(1 << n):
        idx = np.zeros(flat.shape[0], dtype=np.int64)
        w = np.ones(flat.shape[0])
        for d in range(n):
            if (corner >> d) & 1:
                idx += (base[:, d] + 1) * strides[d]
                w *= frac[:, d]
            else:
                idx += base[:, d] * strides[d]
                w *= 1.0 - frac[:, d]
        out += w * values[idx]
    return out.reshape(points.shape[:-1])


def backup(values, lo, hi, res, points, disp, mode, tol):
    """One semi-Lagrangian step: maxmin (mode 0) or minmax (mode 1) over actions.

    ``points`` is (P, n), ``disp`` is (P, K, L, n). Returns the backed-up values
    and a per-point flag telling whether any transition left the box.
    """
    y = points[:, None, None, :] + disp
    outside = np.any((y < lo - tol) | (y > hi + tol), axis=(1, 2, 3))
    y = np.clip(y, lo, hi)
    q = interp(values, lo, hi, res, y)
    if mode == 0:
        vals = q.min(axis=2).max(axis=1)
    else:
        vals = q.max(axis=1).min(axis=1)
    return vals, outside


def saddle(payoff):
    """Pure maxmin / minmax of a batch of (K, L) payoff matrices.

    Returns ``h_minus, h_plus, u_star, v_star``; ``u_star`` attains the maxmin,
    ``v_star`` the minmax, ties to the lowest index.
    """
    row_min = payoff.min(axis=2)
    col_max = payoff.max(axis=1)
    u_star = np.argmax(row_min, axis=1)
    v_star = np.argmin(col_max, axis=1)
    rows = np.arange(payoff.shape[0])
    return row_min[rows, u_star], col_max[rows, v_star], u_star, v_star


def levelset_candidates(values, lo, hi, res, level):
    """Sub-level nodes and level crossings on grid edges, in node order.

    For each node: the node itself if ``values <= level``, then for every axis
    the point where the linear edge interpolant toward the next node crosses
    ``level`` (only when exactly one endpoint is sub-level).
    """
    n = len(res)
    grids = np.meshgrid(*[np.linspace(lo[d], hi[d], res[d]) for d in range(n)], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    h = (hi - lo) / (res - 1)
    vals = values.reshape(tuple(res))
    inside = vals <= level
    slots = np.full((nodes.shape[0], n + 1, n), np.nan)
    slots[:, 0, :][inside.ravel()] = nodes[inside.ravel()]
    for d in range(n):
        a = np.take(vals, np.arange(res[d] - 1), axis=d)
        b = np.take(vals, np.arange(1, res[d]), axis=d)
        cross = (a <= level) != (b <= level)
        pad = [(0, 0)] * n
        pad[d] = (0, 1)
        a = np.pad(a, pad, constant_values=0.0).ravel()
        b = np.pad(b, pad, constant_values=1.0).ravel()
        cross = np.pad(cross, pad, constant_values=False).ravel()
        frac = (level - a[cross]) / (b[cross] - a[cross])
        pts = nodes[cross].copy()
        pts[:, d] += frac * h[d]
        slot = slots[:, d + 1, :]
        slot[cross] = pts
        slots[:, d + 1, :] = slot
    slots = slots.reshape(-1, n)
    return slots[~np.isnan(slots[:, 0])]


def nearest(candidates, queries):
    """Index and euclidean distance of the first closest candidate per query."""
    diff = queries[:, None, :] - candidates[None, :, :]
    d2 = np.einsum("qmk,qmk->qm", diff, diff)
    idx = np.argmin(d2, axis=1)
    return idx, np.sqrt(d2[np.arange(len(queries)), idx])
