"""Exact earth mover's distance between small 2-D mass distributions.

The transport problem is solved as a min-cost flow with successive shortest
augmenting paths (Dijkstra on reduced costs), compiled with numba.  Because the ground distance is
a metric, mass shared by both maps at the same pixel costs nothing to keep in
place, so only the positive part of ``a - b`` is shipped to the negative part.
"""

import numba
import numpy as np

from ksora.errors import DimensionError, SizeError, UndefinedMetricError

EXACT_MAX_SIDE = 16


def _as_distribution(x, name):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D map, got shape {x.shape}")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise UndefinedMetricError(f"{name}: EMD needs finite nonnegative mass")
    total = x.sum()
    if total <= 0:
        raise UndefinedMetricError(f"{name}: zero total mass")
    return x / total


def _cell_edges(n, bins):
    return np.floor(np.linspace(0, n, bins + 1)).astype(int)


def pool_to_grid(x, max_side=EXACT_MAX_SIDE):
    """Mean-pool ``x`` to at most ``max_side`` cells per axis.

    Returns ``(pooled, row_centres, col_centres)`` with centres in the source
    pixel coordinates, so distances stay in original pixel units.
    """
    h, w = x.shape
    th, tw = min(h, max_side), min(w, max_side)
    re, ce = _cell_edges(h, th), _cell_edges(w, tw)
    pooled = np.empty((th, tw))
    for r in range(th):
        for c in range(tw):
            pooled[r, c] = x[re[r]:re[r + 1], ce[c]:ce[c + 1]].mean()
    rows = (re[:-1] + re[1:] - 1) / 2.0
    cols = (ce[:-1] + ce[1:] - 1) / 2.0
    return pooled, rows, cols


@numba.njit(cache=True)
def _ssp(supply, demand, cost, eps, zero_rc):
    """Successive shortest paths on the residual transportation network.

    Nodes ``0..ns-1`` are supplies and ``ns..ns+nt-1`` demands.  Forward arcs
    are uncapacitated; a backward arc ``j -> i`` exists while ``flow[i, j]``
    is positive.  Potentials keep every residual reduced cost nonnegative,
    so each Dijkstra run is exact.  After each run, further zero reduced-cost
    paths are augmented before the potentials move again.
    """
    ns, nt = cost.shape
    n = ns + nt
    flow = np.zeros((ns, nt))
    pot = np.zeros(n)
    dist = np.empty(n)
    done = np.empty(n, dtype=np.bool_)
    pred = np.empty(n, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    inf = np.inf
    while True:
        open_s = 0
        for i in range(ns):
            if supply[i] > eps:
                open_s += 1
        open_t = 0
        for j in range(nt):
            if demand[j] > eps:
                open_t += 1
        if open_s == 0 or open_t == 0:
            break

        # Dijkstra from all open supplies, stopping at the first open demand.
        for u in range(n):
            dist[u] = 0.0 if (u < ns and supply[u] > eps) else inf
            done[u] = False
            pred[u] = -1
        target = -1
        while True:
            u = -1
            best = inf
            for v in range(n):
                if not done[v] and dist[v] < best:
                    best = dist[v]
                    u = v
            if u < 0:
                break
            done[u] = True
            if u < ns:
                for j in range(nt):
                    v = ns + j
                    if done[v]:
                        continue
                    rc = cost[u, j] + pot[u] - pot[v]
                    if rc < 0.0:
                        rc = 0.0
                    if best + rc < dist[v]:
                        dist[v] = best + rc
                        pred[v] = u
            else:
                j = u - ns
                if demand[j] > eps:
                    target = j
                    break
                for i in range(ns):
                    if done[i] or flow[i, j] <= eps:
                        continue
                    rc = pot[u] - cost[i, j] - pot[i]
                    if rc < 0.0:
                        rc = 0.0
                    if best + rc < dist[i]:
                        dist[i] = best + rc
                        pred[i] = u
        if target < 0:
            return flow, False
        cap = dist[ns + target]
        for u in range(n):
            pot[u] += dist[u] if dist[u] < cap else cap

        # Augment along the shortest path, then along any remaining
        # zero reduced-cost paths (breadth-first) at these potentials.
        while target >= 0:
            j = target
            amount = demand[target]
            while True:
                i = pred[ns + j]
                if pred[i] < 0:
                    break
                jp = pred[i] - ns
                if flow[i, jp] < amount:
                    amount = flow[i, jp]
                j = jp
            if supply[i] < amount:
                amount = supply[i]
            j = target
            while True:
                i = pred[ns + j]
                flow[i, j] += amount
                if pred[i] < 0:
                    break
                jp = pred[i] - ns
                flow[i, jp] -= amount
                if flow[i, jp] < 0.0:
                    flow[i, jp] = 0.0
                j = jp
            supply[i] -= amount
            demand[target] -= amount

            target = -1
            head = 0
            tail = 0
            for u in range(n):
                pred[u] = -1
                done[u] = False
            for i in range(ns):
                if supply[i] > eps:
                    done[i] = True
                    queue[tail] = i
                    tail += 1
            while head < tail and target < 0:
                u = queue[head]
                head += 1
                if u < ns:
                    for j in range(nt):
                        v = ns + j
                        if done[v] or cost[u, j] + pot[u] - pot[v] > zero_rc:
                            continue
                        done[v] = True
                        pred[v] = u
                        if demand[j] > eps:
                            target = j
                            break
                        queue[tail] = v
                        tail += 1
                else:
                    j = u - ns
                    for i in range(ns):
                        if done[i] or flow[i, j] <= eps:
                            continue
                        if pot[u] - cost[i, j] - pot[i] > zero_rc:
                            continue
                        done[i] = True
                        pred[i] = u
                        queue[tail] = i
                        tail += 1
    return flow, True


def transport_cost(supply, demand, cost, tol=1e-13):
    """Minimum cost of shipping ``supply`` to ``demand`` over a dense bipartite graph.

    ``cost[i, j] >= 0`` is the unit cost from supply node ``i`` to demand node
    ``j``; both mass vectors must have (nearly) equal totals.  Returns
    ``(total_cost, flow)``.
    """
    supply = np.array(supply, dtype=np.float64)
    demand = np.array(demand, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    if cost.shape != (supply.size, demand.size):
        raise DimensionError(f"cost {cost.shape} does not match {supply.size} x {demand.size}")
    eps = tol * max(float(supply.sum()), 1.0)
    zero_rc = 1e-12 * max(float(cost.max(initial=0.0)), 1.0)
    flow, ok = _ssp(supply, demand, cost, eps, zero_rc)
    if not ok:
        raise UndefinedMetricError("supply cannot reach remaining demand")
    return float((flow * cost).sum()), flow


def _grid_emd(a, b, rows, cols):
    diff = a - b
    src = np.flatnonzero(diff > 0)
    dst = np.flatnonzero(diff < 0)
    if src.size == 0 or dst.size == 0:
        return 0.0
    w = a.shape[1]
    sy, sx = rows[src // w], cols[src % w]
    ty, tx = rows[dst // w], cols[dst % w]
    cost = np.hypot(sy[:, None] - ty[None, :], sx[:, None] - tx[None, :])
    flat = diff.reshape(-1)
    total, _ = transport_cost(flat[src], -flat[dst], cost)
    return total


def emd(a, b, mode="downsampled"):
    """Earth mover's distance with Euclidean ground distance in pixels.

    Both maps are normalised to unit mass.  ``exact`` refuses grids larger
    than 16x16; ``downsampled`` first mean-pools each map to at most 16x16
    cells and measures distances between cell centres.
    """
    a = _as_distribution(a, "a")
    b = _as_distribution(b, "b")
    if a.shape != b.shape:
        raise DimensionError(f"shape mismatch {a.shape} vs {b.shape}")
    h, w = a.shape
    if mode == "exact":
        if h > EXACT_MAX_SIDE or w > EXACT_MAX_SIDE:
            raise SizeError(f"exact EMD limited to {EXACT_MAX_SIDE}x{EXACT_MAX_SIDE}, got {h}x{w}")
        return _grid_emd(a, b, np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64))
    if mode == "downsampled":
        pa, rows, cols = pool_to_grid(a)
        pb, _, _ = pool_to_grid(b)
        return _grid_emd(pa / pa.sum(), pb / pb.sum(), rows, cols)
    raise ValueError(f"unknown EMD mode {mode!r}")
