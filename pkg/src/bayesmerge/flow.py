"""Exact maximum flow on bipartite support graphs.

Dinic's algorithm over Python integers: capacities are weights scaled by
2^60, so there is no overflow and the subcoupling mass is exact to about
1e-18, far below every tolerance in the package.  Graphs here are small
(a few hundred nodes), where the pure-Python implementation is fast
enough and has no dtype pitfalls.
"""

from __future__ import annotations

from collections import deque

import numpy as np

WEIGHT_SCALE = 1 << 60


class _Dinic:
    def __init__(self, n: int):
        self.n = n
        self.graph: list[list[list]] = [[] for _ in range(n)]

    def add_edge(self, u: int, v: int, cap: int):
        # edge entries: [to, capacity, index of reverse edge]
        self.graph[u].append([v, cap, len(self.graph[v])])
        self.graph[v].append([u, 0, len(self.graph[u]) - 1])

    def _bfs(self, s: int, t: int) -> bool:
        self.level = [-1] * self.n
        self.level[s] = 0
        dq = deque([s])
        while dq:
            u = dq.popleft()
            for e in self.graph[u]:
                if e[1] > 0 and self.level[e[0]] < 0:
                    self.level[e[0]] = self.level[u] + 1
                    dq.append(e[0])
        return self.level[t] >= 0

    def _dfs(self, u: int, t: int, f: int) -> int:
        if u == t:
            return f
        while self.it[u] < len(self.graph[u]):
            e = self.graph[u][self.it[u]]
            v = e[0]
            if e[1] > 0 and self.level[v] == self.level[u] + 1:
                d = self._dfs(v, t, min(f, e[1]))
                if d > 0:
                    e[1] -= d
                    self.graph[v][e[2]][1] += d
                    return d
            self.it[u] += 1
        return 0

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while self._bfs(s, t):
            self.it = [0] * self.n
            while True:
                f = self._dfs(s, t, 1 << 80)
                if f == 0:
                    break
                flow += f
        return flow


def scale_weights(w: np.ndarray) -> list[int]:
    return [int(round(float(x) * WEIGHT_SCALE)) for x in w]


def max_subcoupling_mass(iw: list[int], iv: list[int], allowed: np.ndarray) -> int:
    """Largest transportable integer mass restricted to allowed pairs.

    ``allowed`` is a boolean (len(iw), len(iv)) matrix of admissible
    source/target pairs.
    """
    n, m = len(iw), len(iv)
    if not allowed.any():
        return 0
    din = _Dinic(n + m + 2)
    src, snk = 0, n + m + 1
    for i in range(n):
        din.add_edge(src, 1 + i, iw[i])
    for j in range(m):
        din.add_edge(1 + n + j, snk, iv[j])
    rows, cols = np.nonzero(allowed)
    cap = 2 * WEIGHT_SCALE
    for i, j in zip(rows.tolist(), cols.tolist()):
        din.add_edge(1 + i, 1 + n + j, cap)
    return din.max_flow(src, snk)
