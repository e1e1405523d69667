"""Compiled inner loops for map ensembles.

Each kernel advances a block of independent orbits and writes ray counts at
the checkpoints.  ``status[t]`` is 1 when orbit ``t`` hit a point where the
map cannot continue; its counts are then meaningless and the caller redraws
the initial point.
"""
import numpy as np
from numba import njit

ABSORBED = 1


@njit(cache=True, nogil=True)
def boole_block(x0, checkpoints, counts, junction, status, violations, audit):
    n_traj = x0.shape[0]
    n_chk = checkpoints.shape[0]
    n_max = checkpoints[n_chk - 1]
    for t in range(n_traj):
        x = x0[t]
        c1 = 0
        c2 = 0
        ci = 0
        prev = 0
        if x < -1.0:
            prev = 1
        elif x > 1.0:
            prev = 2
        status[t] = 0
        viol = 0
        for k in range(1, n_max + 1):
            if x == 0.0:
                status[t] = ABSORBED
                break
            x = x - 1.0 / x
            lab = 0
            if x < -1.0:
                lab = 1
                c1 += 1
            elif x > 1.0:
                lab = 2
                c2 += 1
            if audit and lab != 0 and prev != 0 and lab != prev:
                viol += 1
            prev = lab
            if k == checkpoints[ci]:
                counts[t, ci, 0] = c1
                counts[t, ci, 1] = c2
                junction[t, ci] = k - c1 - c2
                ci += 1
        violations[t] = viol


@njit(cache=True, nogil=True)
def _cubic_label(branch, delta, eps):
    if branch == 1:
        if 0.0 < delta < eps:
            return 1
        return 0
    if branch == 2:
        if -eps < delta < 0.0:
            return 2
        if 0.0 < delta < eps:
            return 3
        return 0
    if -eps < delta < 0.0:
        return 4
    return 0


@njit(cache=True, nogil=True)
def _split(x):
    if x <= 1.0 / 3.0:
        return 1, x
    if x < 2.0 / 3.0:
        return 2, x - 0.5
    return 3, x - 1.0


@njit(cache=True, nogil=True)
def cubic_block(x0, consts, eps, checkpoints, counts, junction, status, violations, audit):
    n_traj = x0.shape[0]
    n_chk = checkpoints.shape[0]
    n_max = checkpoints[n_chk - 1]
    third = 1.0 / 3.0
    sixth = 1.0 / 6.0
    for t in range(n_traj):
        branch, delta = _split(x0[t])
        c = np.zeros(4, dtype=np.int64)
        ci = 0
        prev = _cubic_label(branch, delta, eps)
        status[t] = 0
        viol = 0
        for k in range(1, n_max + 1):
            if delta == 0.0:
                status[t] = ABSORBED
                break
            nd = delta + consts[branch - 1] * delta * delta * delta
            if branch == 1 and nd <= third:
                delta = nd
            elif branch == 2 and -sixth < nd < sixth:
                delta = nd
            elif branch == 3 and nd >= -third:
                delta = nd
            else:
                if branch == 1:
                    x = nd
                elif branch == 2:
                    x = 0.5 + nd
                else:
                    x = 1.0 + nd
                if x < 0.0:
                    x = 0.0
                elif x > 1.0:
                    x = 1.0
                branch, delta = _split(x)
            lab = _cubic_label(branch, delta, eps)
            if lab != 0:
                c[lab - 1] += 1
            if audit and lab != 0 and prev != 0 and lab != prev:
                viol += 1
            prev = lab
            if k == checkpoints[ci]:
                s = 0
                for r in range(4):
                    counts[t, ci, r] = c[r]
                    s += c[r]
                junction[t, ci] = k - s
                ci += 1
        violations[t] = viol
