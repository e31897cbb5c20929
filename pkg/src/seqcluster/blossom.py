"""Exact maximum-weight matching on general graphs (Edmonds' blossom algorithm, O(n^3)).

Integer weights only; the primal-dual method keeps every dual variable
integral by working with doubled weights.  Used by the decoder to solve
minimum-weight perfect matching through the usual weight inversion.
"""

from __future__ import annotations


class _Blossom:
    """State for one run of the primal-dual blossom algorithm.

    Vertices are 0..n-1, non-trivial blossoms n..2n-1.  Edge k has endpoints
    2k and 2k+1; ``endpoint[p]`` is the vertex at endpoint p.
    """

    def __init__(self, n: int, edges: list[tuple[int, int, int]], maxcardinality: bool):
        self.n = n
        self.edges = [(i, j, 2 * w) for i, j, w in edges]
        self.maxcardinality = maxcardinality
        m = len(edges)
        self.endpoint = [self.edges[p // 2][p % 2] for p in range(2 * m)]
        self.neighbend = [[] for _ in range(n)]
        for k, (i, j, _) in enumerate(self.edges):
            self.neighbend[i].append(2 * k + 1)
            self.neighbend[j].append(2 * k)
        maxw = max([0] + [w for _, _, w in self.edges])
        self.mate = [-1] * n
        self.label = [0] * (2 * n)
        self.labelend = [-1] * (2 * n)
        self.inblossom = list(range(n))
        self.parent = [-1] * (2 * n)
        self.childs: list = [None] * (2 * n)
        self.base = list(range(n)) + [-1] * n
        self.endps: list = [None] * (2 * n)
        self.bestedge = [-1] * (2 * n)
        self.bestedges: list = [None] * (2 * n)
        self.unused = list(range(n, 2 * n))
        self.dual = [maxw] * n + [0] * n
        self.allowed = [False] * m
        self.queue: list[int] = []

    def slack(self, k: int) -> int:
        i, j, w = self.edges[k]
        return self.dual[i] + self.dual[j] - 2 * w

    def leaves(self, b: int):
        if b < self.n:
            yield b
            return
        stack = [b]
        while stack:
            t = stack.pop()
            if t < self.n:
                yield t
            else:
                stack.extend(reversed(self.childs[t]))

    def assign_label(self, w: int, t: int, p: int):
        b = self.inblossom[w]
        self.label[w] = self.label[b] = t
        self.labelend[w] = self.labelend[b] = p
        self.bestedge[w] = self.bestedge[b] = -1
        if t == 1:
            self.queue.extend(self.leaves(b))
        else:
            base = self.base[b]
            self.assign_label(self.endpoint[self.mate[base]], 1, self.mate[base] ^ 1)

    def scan_blossom(self, v: int, w: int) -> int:
        """Trace back from v and w; return the common base or -1 for an augmenting path."""
        path = []
        base = -1
        while v != -1 or w != -1:
            b = self.inblossom[v]
            if self.label[b] & 4:
                base = self.base[b]
                break
            path.append(b)
            self.label[b] = 5
            if self.labelend[b] == -1:
                v = -1
            else:
                v = self.endpoint[self.labelend[b]]
                b = self.inblossom[v]
                v = self.endpoint[self.labelend[b]]
            if w != -1:
                v, w = w, v
        for b in path:
            self.label[b] = 1
        return base

    def add_blossom(self, base: int, k: int):
        v, w, _ = self.edges[k]
        bb = self.inblossom[base]
        bv = self.inblossom[v]
        bw = self.inblossom[w]
        b = self.unused.pop()
        self.base[b] = base
        self.parent[b] = -1
        self.parent[bb] = b
        path, endps = [], []
        while bv != bb:
            self.parent[bv] = b
            path.append(bv)
            endps.append(self.labelend[bv])
            v = self.endpoint[self.labelend[bv]]
            bv = self.inblossom[v]
        path.append(bb)
        path.reverse()
        endps.reverse()
        endps.append(2 * k)
        while bw != bb:
            self.parent[bw] = b
            path.append(bw)
            endps.append(self.labelend[bw] ^ 1)
            w = self.endpoint[self.labelend[bw]]
            bw = self.inblossom[w]
        self.childs[b] = path
        self.endps[b] = endps
        self.label[b] = 1
        self.labelend[b] = self.labelend[bb]
        self.dual[b] = 0
        for u in self.leaves(b):
            if self.label[self.inblossom[u]] == 2:
                self.queue.append(u)
            self.inblossom[u] = b
        best_to = [-1] * (2 * self.n)
        for sub in path:
            if self.bestedges[sub] is None:
                lists = [[p // 2 for p in self.neighbend[u]] for u in self.leaves(sub)]
            else:
                lists = [self.bestedges[sub]]
            for lst in lists:
                for kk in lst:
                    i, j, _ = self.edges[kk]
                    if self.inblossom[j] == b:
                        i, j = j, i
                    bj = self.inblossom[j]
                    if bj != b and self.label[bj] == 1 and (
                            best_to[bj] == -1 or self.slack(kk) < self.slack(best_to[bj])):
                        best_to[bj] = kk
            self.bestedges[sub] = None
            self.bestedge[sub] = -1
        self.bestedges[b] = [kk for kk in best_to if kk != -1]
        self.bestedge[b] = -1
        for kk in self.bestedges[b]:
            if self.bestedge[b] == -1 or self.slack(kk) < self.slack(self.bestedge[b]):
                self.bestedge[b] = kk

    def expand_blossom(self, b: int, endstage: bool):
        n = self.n
        for sub in self.childs[b]:
            self.parent[sub] = -1
            if sub < n:
                self.inblossom[sub] = sub
            elif endstage and self.dual[sub] == 0:
                self.expand_blossom(sub, endstage)
            else:
                for u in self.leaves(sub):
                    self.inblossom[u] = sub
        if not endstage and self.label[b] == 2:
            childs, endps = self.childs[b], self.endps[b]
            entry = self.inblossom[self.endpoint[self.labelend[b] ^ 1]]
            j = childs.index(entry)
            if j & 1:
                j -= len(childs)
                jstep, trick = 1, 0
            else:
                jstep, trick = -1, 1
            p = self.labelend[b]
            while j != 0:
                self.label[self.endpoint[p ^ 1]] = 0
                self.label[self.endpoint[endps[j - trick] ^ trick ^ 1]] = 0
                self.assign_label(self.endpoint[p ^ 1], 2, p)
                self.allowed[endps[j - trick] // 2] = True
                j += jstep
                p = endps[j - trick] ^ trick
                self.allowed[p // 2] = True
                j += jstep
            bv = childs[j]
            self.label[self.endpoint[p ^ 1]] = self.label[bv] = 2
            self.labelend[self.endpoint[p ^ 1]] = self.labelend[bv] = p
            self.bestedge[bv] = -1
            j += jstep
            while childs[j] != entry:
                bv = childs[j]
                if self.label[bv] == 1:
                    j += jstep
                    continue
                found = None
                for u in self.leaves(bv):
                    if self.label[u] != 0:
                        found = u
                        break
                if found is not None:
                    self.label[found] = 0
                    self.label[self.endpoint[self.mate[self.base[bv]]]] = 0
                    self.assign_label(found, 2, self.labelend[found])
                j += jstep
        self.label[b] = self.labelend[b] = -1
        self.childs[b] = self.endps[b] = None
        self.base[b] = -1
        self.bestedges[b] = None
        self.bestedge[b] = -1
        self.unused.append(b)

    def augment_blossom(self, b: int, v: int):
        t = v
        while self.parent[t] != b:
            t = self.parent[t]
        if t >= self.n:
            self.augment_blossom(t, v)
        childs, endps = self.childs[b], self.endps[b]
        i = j = childs.index(t)
        if i & 1:
            j -= len(childs)
            jstep, trick = 1, 0
        else:
            jstep, trick = -1, 1
        while j != 0:
            j += jstep
            t = childs[j]
            p = endps[j - trick] ^ trick
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p])
            j += jstep
            t = childs[j]
            if t >= self.n:
                self.augment_blossom(t, self.endpoint[p ^ 1])
            self.mate[self.endpoint[p]] = p ^ 1
            self.mate[self.endpoint[p ^ 1]] = p
        self.childs[b] = childs[i:] + childs[:i]
        self.endps[b] = endps[i:] + endps[:i]
        self.base[b] = self.base[self.childs[b][0]]

    def augment_matching(self, k: int):
        v, w, _ = self.edges[k]
        for s, p in ((v, 2 * k + 1), (w, 2 * k)):
            while True:
                bs = self.inblossom[s]
                if bs >= self.n:
                    self.augment_blossom(bs, s)
                self.mate[s] = p
                if self.labelend[bs] == -1:
                    break
                t = self.endpoint[self.labelend[bs]]
                bt = self.inblossom[t]
                s = self.endpoint[self.labelend[bt]]
                j = self.endpoint[self.labelend[bt] ^ 1]
                if bt >= self.n:
                    self.augment_blossom(bt, j)
                self.mate[j] = self.labelend[bt]
                p = self.labelend[bt] ^ 1

    def _stage(self) -> bool:
        """Grow alternating trees until one augmentation happens; False when optimal."""
        n = self.n
        while True:
            while self.queue:
                v = self.queue.pop()
                for p in self.neighbend[v]:
                    k = p // 2
                    w = self.endpoint[p]
                    if self.inblossom[v] == self.inblossom[w]:
                        continue
                    kslack = None
                    if not self.allowed[k]:
                        kslack = self.slack(k)
                        if kslack <= 0:
                            self.allowed[k] = True
                    if self.allowed[k]:
                        if self.label[self.inblossom[w]] == 0:
                            self.assign_label(w, 2, p ^ 1)
                        elif self.label[self.inblossom[w]] == 1:
                            base = self.scan_blossom(v, w)
                            if base >= 0:
                                self.add_blossom(base, k)
                            else:
                                self.augment_matching(k)
                                return True
                        elif self.label[w] == 0:
                            self.label[w] = 2
                            self.labelend[w] = p ^ 1
                    elif self.label[self.inblossom[w]] == 1:
                        b = self.inblossom[v]
                        if self.bestedge[b] == -1 or kslack < self.slack(self.bestedge[b]):
                            self.bestedge[b] = k
                    elif self.label[w] == 0:
                        if self.bestedge[w] == -1 or kslack < self.slack(self.bestedge[w]):
                            self.bestedge[w] = k

            # dual adjustment
            dtype, delta, dedge, dblossom = -1, None, -1, -1
            if not self.maxcardinality:
                dtype, delta = 1, min(self.dual[:n])
            for v in range(n):
                if self.label[self.inblossom[v]] == 0 and self.bestedge[v] != -1:
                    d = self.slack(self.bestedge[v])
                    if dtype == -1 or d < delta:
                        dtype, delta, dedge = 2, d, self.bestedge[v]
            for b in range(2 * n):
                if self.parent[b] == -1 and self.label[b] == 1 and self.bestedge[b] != -1:
                    d = self.slack(self.bestedge[b]) // 2
                    if dtype == -1 or d < delta:
                        dtype, delta, dedge = 3, d, self.bestedge[b]
            for b in range(n, 2 * n):
                if (self.base[b] >= 0 and self.parent[b] == -1 and self.label[b] == 2
                        and (dtype == -1 or self.dual[b] < delta)):
                    dtype, delta, dblossom = 4, self.dual[b], b
            if dtype == -1:
                dtype, delta = 1, max(0, min(self.dual[:n]))

            for v in range(n):
                lab = self.label[self.inblossom[v]]
                if lab == 1:
                    self.dual[v] -= delta
                elif lab == 2:
                    self.dual[v] += delta
            for b in range(n, 2 * n):
                if self.base[b] >= 0 and self.parent[b] == -1:
                    if self.label[b] == 1:
                        self.dual[b] += delta
                    elif self.label[b] == 2:
                        self.dual[b] -= delta

            if dtype == 1:
                return False
            if dtype == 2:
                self.allowed[dedge] = True
                i, j, _ = self.edges[dedge]
                if self.label[self.inblossom[i]] == 0:
                    i, j = j, i
                self.queue.append(i)
            elif dtype == 3:
                self.allowed[dedge] = True
                i, _, _ = self.edges[dedge]
                self.queue.append(i)
            else:
                self.expand_blossom(dblossom, False)

    def solve(self) -> list[int]:
        n = self.n
        for _ in range(n):
            self.label = [0] * (2 * n)
            self.bestedge = [-1] * (2 * n)
            self.bestedges[n:] = [None] * n
            self.allowed = [False] * len(self.edges)
            self.queue = []
            for v in range(n):
                if self.mate[v] == -1 and self.label[self.inblossom[v]] == 0:
                    self.assign_label(v, 1, -1)
            if not self._stage():
                break
            for b in range(n, 2 * n):
                if (self.parent[b] == -1 and self.base[b] >= 0 and self.label[b] == 1
                        and self.dual[b] == 0):
                    self.expand_blossom(b, True)
        return [self.endpoint[p] if p >= 0 else -1 for p in self.mate]


def max_weight_matching(n: int, edges, maxcardinality: bool = False) -> list[int]:
    """Maximum-weight matching of a graph on vertices 0..n-1.

    ``edges`` is an iterable of ``(i, j, w)`` with integer ``w``.  With
    ``maxcardinality`` the result is a maximum-weight matching among those of
    maximum cardinality.  Returns ``mate`` with ``mate[v] = -1`` if unmatched.
    """
    edges = [(int(i), int(j), int(w)) for i, j, w in edges]
    for i, j, _ in edges:
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"bad edge {(i, j)}")
    if not edges:
        return [-1] * n
    return _Blossom(n, edges, maxcardinality).solve()


def min_weight_perfect_matching(n: int, edges) -> list[int]:
    """Minimum-weight perfect matching; raises if none exists."""
    edges = [(int(i), int(j), int(w)) for i, j, w in edges]
    top = max((w for _, _, w in edges), default=0) + 1
    mate = max_weight_matching(n, [(i, j, top - w) for i, j, w in edges], maxcardinality=True)
    if any(m == -1 for m in mate):
        raise ValueError("no perfect matching exists")
    return mate
