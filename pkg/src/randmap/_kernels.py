"""Numba kernels for functional-graph decomposition and branch statistics.

Everything here works on 0-based image arrays.  The per-mapping routines
reuse caller-provided scratch arrays so that batch loops allocate nothing.
"""

import numpy as np
from numba import njit

# Sentinels used in the anchor array.
_UNSET = -2
_NONE = -1


@njit(cache=True)
def decompose_into(f, cyclic, height, root, indeg, stack):
    """Fill cyclic/height/root for image ``f``; return the cycle-vertex count.

    A vertex survives iterated in-degree peeling iff it lies on a cycle.
    Heights and tree roots are then resolved by walking each unresolved
    path down to a resolved vertex and unwinding.
    """
    n = f.shape[0]
    for v in range(n):
        indeg[v] = 0
        cyclic[v] = True
    for v in range(n):
        indeg[f[v]] += 1
    sp = 0
    for v in range(n):
        if indeg[v] == 0:
            stack[sp] = v
            sp += 1
            cyclic[v] = False
    while sp > 0:
        sp -= 1
        w = f[stack[sp]]
        indeg[w] -= 1
        if indeg[w] == 0:
            stack[sp] = w
            sp += 1
            cyclic[w] = False
    lam = 0
    for v in range(n):
        if cyclic[v]:
            height[v] = 0
            root[v] = v
            lam += 1
        else:
            height[v] = -1
    for v in range(n):
        if height[v] >= 0:
            continue
        sp = 0
        u = v
        while height[u] < 0:
            stack[sp] = u
            sp += 1
            u = f[u]
        h = height[u]
        r = root[u]
        while sp > 0:
            sp -= 1
            u = stack[sp]
            h += 1
            height[u] = h
            root[u] = r
    return lam


@njit(cache=True)
def anchors_into(f, height, level, anchor, stack):
    """Fill ``anchor[v]`` = the height-``level`` vertex on v's path to the cycle.

    Vertices below the level get -1.  For level 0 this equals the tree root.
    """
    n = f.shape[0]
    for v in range(n):
        if height[v] < level:
            anchor[v] = _NONE
        elif height[v] == level:
            anchor[v] = v
        else:
            anchor[v] = _UNSET
    for v in range(n):
        if anchor[v] != _UNSET:
            continue
        sp = 0
        u = v
        while anchor[u] == _UNSET:
            stack[sp] = u
            sp += 1
            u = f[u]
        a = anchor[u]
        while sp > 0:
            sp -= 1
            u = stack[sp]
            if height[u] == level:
                a = u
            anchor[u] = a


@njit(cache=True)
def branch_stats_into(height, anchor, level, bh, out, b):
    """Branch statistics at ``level`` written into row ``b`` of ``out``.

    Columns: 0 branch_count, 1 top, 2 second, 3 tie, 4 crown_size,
    5 crown_roots.  Branches are the subtrees rooted at vertices of
    height exactly ``level``; branch heights are relative to their root.
    With a single branch the second height is 0 by convention; with no
    branch all columns are 0.
    """
    n = height.shape[0]
    nb = 0
    for v in range(n):
        if height[v] == level:
            bh[v] = 0
            nb += 1
    out[b, 0] = nb
    if nb == 0:
        out[b, 1] = 0
        out[b, 2] = 0
        out[b, 3] = 0
        out[b, 4] = 0
        out[b, 5] = 0
        return
    for v in range(n):
        if height[v] > level:
            a = anchor[v]
            rh = height[v] - level
            if rh > bh[a]:
                bh[a] = rh
    top = -1
    second_lower = -1
    tie = 0
    top_anchor = -1
    for v in range(n):
        if height[v] == level:
            x = bh[v]
            if x > top:
                if top > second_lower:
                    second_lower = top
                top = x
                tie = 1
                top_anchor = v
            elif x == top:
                tie += 1
            elif x > second_lower:
                second_lower = x
    if tie > 1:
        second = top
    elif nb == 1:
        second = 0
    else:
        second = second_lower
    crown_size = 0
    crown_roots = 0
    if tie == 1:
        thr = level + second + 1
        for v in range(n):
            if height[v] >= thr and anchor[v] == top_anchor:
                crown_size += 1
                if height[v] == thr:
                    crown_roots += 1
    out[b, 1] = top
    out[b, 2] = second
    out[b, 3] = tie
    out[b, 4] = crown_size
    out[b, 5] = crown_roots


@njit(cache=True)
def batch_stats(images, level):
    """Per-mapping statistics for a batch of 0-based images.

    Returns an int32 array of shape (B, 8) with columns
    branch_count, top, second, tie, crown_size, crown_roots, lam, max_height.
    """
    nb_maps, n = images.shape
    out = np.empty((nb_maps, 8), dtype=np.int32)
    cyclic = np.empty(n, dtype=np.uint8)
    height = np.empty(n, dtype=np.int32)
    root = np.empty(n, dtype=np.int32)
    indeg = np.empty(n, dtype=np.int32)
    stack = np.empty(n, dtype=np.int32)
    anchor = np.empty(n, dtype=np.int32)
    bh = np.empty(n, dtype=np.int32)
    for b in range(nb_maps):
        f = images[b]
        lam = decompose_into(f, cyclic, height, root, indeg, stack)
        if level == 0:
            branch_stats_into(height, root, 0, bh, out, b)
        else:
            anchors_into(f, height, level, anchor, stack)
            branch_stats_into(height, anchor, level, bh, out, b)
        maxh = 0
        for v in range(n):
            if height[v] > maxh:
                maxh = height[v]
        out[b, 6] = lam
        out[b, 7] = maxh
    return out


@njit(cache=True)
def scatter_max(keys, values, out):
    """out[keys[i]] = max(out[keys[i]], values[i]) over all i."""
    for i in range(keys.shape[0]):
        k = keys[i]
        if values[i] > out[k]:
            out[k] = values[i]


@njit(cache=True)
def decode_odometer(start, count, n, out):
    """Write mappings with indices start..start+count-1 into ``out`` (0-based).

    Index i encodes the image in base n, vertex 0 as the fastest digit.
    """
    for i in range(count):
        x = start + i
        for v in range(n):
            out[i, v] = x % n
            x //= n
