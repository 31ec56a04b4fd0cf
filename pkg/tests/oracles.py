"""Slow, obviously-correct reference implementations used as test oracles."""

from collections import deque
from itertools import product

import numpy as np


def neighbour_offsets(conn):
    offs = []
    for d in product((-1, 0, 1), repeat=3):
        k = sum(abs(v) for v in d)
        if k == 0:
            continue
        if conn == 6 and k > 1 or conn == 18 and k > 2:
            continue
        offs.append(d)
    return offs


def flood_fill_components(arr, conn):
    """List of components as sets of voxel tuples, in row-major discovery order."""
    arr = np.asarray(arr, dtype=bool)
    seen = np.zeros(arr.shape, dtype=bool)
    offs = neighbour_offsets(conn)
    comps = []
    for start in zip(*np.nonzero(arr)):
        if seen[start]:
            continue
        comp = set()
        queue = deque([start])
        seen[start] = True
        while queue:
            v = queue.popleft()
            comp.add(v)
            for d in offs:
                n = (v[0] + d[0], v[1] + d[1], v[2] + d[2])
                if all(0 <= n[i] < arr.shape[i] for i in range(3)) and arr[n] and not seen[n]:
                    seen[n] = True
                    queue.append(n)
        comps.append(comp)
    return comps


def ordered_components(arr, conn):
    """Components sorted by descending size, ties by first row-major voxel."""
    comps = flood_fill_components(arr, conn)
    return sorted(comps, key=lambda c: (-len(c), min(c)))


def brute_distance(a, b, spacing=(1.0, 1.0, 1.0)):
    pa = np.argwhere(a) * np.asarray(spacing)
    pb = np.argwhere(b) * np.asarray(spacing)
    best = np.inf
    for p in pa:
        best = min(best, float(np.sqrt(((pb - p) ** 2).sum(axis=1)).min()))
    return best


def set_dsc(a, b):
    sa = set(zip(*np.nonzero(a)))
    sb = set(zip(*np.nonzero(b)))
    if not sa and not sb:
        return 1.0
    return 2.0 * len(sa & sb) / (len(sa) + len(sb))
