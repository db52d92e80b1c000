"""Reference kernels in numpy; the compiled twin must match these bit for bit."""
import numpy as np

SCORE_QUANTUM = 1e9


def advance(x, y, tx, ty, speed, wait_until, moving, t0, dt, leftover):
    """Move every free mover toward its target by ``speed * dt``.

    Arrays are updated in place. Returns the indices of movers that reached
    their target this tick; their unused distance is stored in ``leftover``.
    """
    active = np.flatnonzero(moving & (wait_until <= t0))
    if active.size == 0:
        return active
    dx = tx[active] - x[active]
    dy = ty[active] - y[active]
    dist = np.sqrt(dx * dx + dy * dy)
    step = speed[active] * dt
    reach = step >= dist
    go = ~reach
    if go.any():
        idx = active[go]
        f = step[go] / dist[go]
        x[idx] = x[idx] + dx[go] * f
        y[idx] = y[idx] + dy[go] * f
    arrived = active[reach]
    if arrived.size:
        x[arrived] = tx[arrived]
        y[arrived] = ty[arrived]
        leftover[arrived] = step[reach] - dist[reach]
    return arrived


def range_pairs(x, y, r):
    """Sorted codes ``i * n + j`` (i < j) of node pairs within distance ``r``."""
    n = x.shape[0]
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    d2 = dx * dx + dy * dy
    i, j = np.nonzero(np.triu(d2 <= r * r, k=1))
    return (i * n + j).astype(np.int64)


def split_scan(values, labels):
    """Best threshold on one feature column already sorted ascending.

    ``labels`` are 0/1 ints aligned with ``values``. The score of a cut is
    ``sum(c_k^2)/n_left + sum(c_k^2)/n_right`` (maximising it minimises the
    weighted child Gini), quantised so that ulp-level noise cannot reorder
    mathematically equal cuts. Returns ``(key, threshold)``; key is -1.0 when
    the column has a single distinct value.
    """
    n = values.shape[0]
    if n < 2:
        return -1.0, 0.0
    ones = np.cumsum(labels)[:-1].astype(np.float64)
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    total_ones = float(ones[-1] + labels[-1])
    zl = nl - ones
    r1 = total_ones - ones
    zr = nr - r1
    score = (zl * zl + ones * ones) / nl + (zr * zr + r1 * r1) / nr
    key = np.rint(score * SCORE_QUANTUM)
    valid = values[:-1] != values[1:]
    if not valid.any():
        return -1.0, 0.0
    key = np.where(valid, key, -1.0)
    k = int(np.argmax(key))
    return float(key[k]), (values[k] + values[k + 1]) / 2.0
