"""Independent reference computations used to freeze expected values.

Nothing here touches the search engine in ``metriclab.metrics``: distances come
from plain breadth-first search over explicit neighbour functions, from free
reduction of letter strings, or from closed forms.
"""

from collections import deque


def bfs_distances(start, neighbours, radius):
    """Unweighted graph distances from ``start`` up to ``radius``."""
    dist = {start: 0}
    q = deque([start])
    while q:
        u = q.popleft()
        if dist[u] == radius:
            continue
        for v in neighbours(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def free_reduce(letters):
    """Freely reduce a sequence of nonzero ints (x and -x cancel)."""
    out = []
    for x in letters:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def tree_distance(u, v):
    """Word distance between two reduced words in a free group with standard letters."""
    inv = tuple(-x for x in reversed(u))
    return len(free_reduce(inv + v))


def l1(v):
    return sum(abs(x) for x in v)


def z_two_three(n):
    """Word length of n in Z with generators 2 and 3 (closed form checked by search below)."""
    n = abs(n)
    if n == 0:
        return 0
    if n == 1:
        return 2
    return -(-n // 3)


def z_two_three_search(limit):
    """Breadth-first lengths on the integer line with steps ±2, ±3."""
    span = 3 * limit + 10

    def nb(x):
        return [y for y in (x + 2, x - 2, x + 3, x - 3) if abs(y) <= span]

    return bfs_distances(0, nb, limit)


def heisenberg_bfs(radius):
    """Cayley graph distances in H3 with x = (1,0,0), y = (0,1,0) and law (a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab')."""

    def mul(p, q):
        return (p[0] + q[0], p[1] + q[1], p[2] + q[2] + p[0] * q[1])

    gens = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]

    def nb(u):
        return [mul(u, s) for s in gens]

    return bfs_distances((0, 0, 0), nb, radius)
