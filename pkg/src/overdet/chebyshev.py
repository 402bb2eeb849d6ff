"""Chebyshev-Lobatto grids, differentiation matrices and quadrature.

Nodes are returned in increasing order on ``[a, b]``.
"""

import numpy as np


def lobatto_nodes(n, a=0.0, b=1.0):
    """``n`` Chebyshev-Lobatto points on ``[a, b]``, increasing."""
    if n < 2:
        raise ValueError("need at least two nodes")
    k = np.arange(n)
    # sin form keeps the nodes exactly symmetric
    x = np.sin(np.pi * (2 * k - (n - 1)) / (2 * (n - 1)))
    r = 0.5 * (a + b) + 0.5 * (b - a) * x
    r[0], r[-1] = a, b
    return r


def diff_matrix(n, a=0.0, b=1.0):
    """First-derivative collocation matrix on :func:`lobatto_nodes` (n, a, b).

    Uses the negative-sum trick for the diagonal.
    """
    x = lobatto_nodes(n, -1.0, 1.0)
    c = np.ones(n)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n)
    dx = x[:, None] - x[None, :]
    D = np.outer(c, 1.0 / c) / (dx + np.eye(n))
    D -= np.diag(D.sum(axis=1))
    return D * (2.0 / (b - a))


def clenshaw_curtis_weights(n, a=0.0, b=1.0):
    """Clenshaw-Curtis weights for the nodes of :func:`lobatto_nodes`."""
    N = n - 1
    theta = np.pi * np.arange(n) / N
    w = np.zeros(n)
    v = np.ones(N - 1)
    if N % 2 == 0:
        w[0] = w[N] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
        v -= np.cos(N * theta[1:-1]) / (N**2 - 1)
    else:
        w[0] = w[N] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[1:-1]) / (4 * k * k - 1)
    w[1:-1] = 2.0 * v / N
    # theta runs from x=1 down to x=-1; our nodes increase, weights are symmetric
    return w * 0.5 * (b - a)


def barycentric_eval(nodes, values, r):
    """Evaluate the polynomial interpolant through Lobatto ``nodes``."""
    n = len(nodes)
    wts = (-1.0) ** np.arange(n)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    r = np.atleast_1d(np.asarray(r, dtype=float))
    diff = r[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    tmp = wts / diff
    out = (tmp @ values) / tmp.sum(axis=1)
    hit = exact.any(axis=1)
    if hit.any():
        out[hit] = values[np.argmax(exact[hit], axis=1)]
    return out


class PiecewiseChebyshev:
    """Multi-domain Lobatto grid with one block per subinterval.

    Interface nodes are duplicated (one copy per adjacent block), so
    ``nodes`` is non-decreasing rather than strictly increasing.
    """

    def __init__(self, breakpoints, counts):
        self.breakpoints = np.asarray(breakpoints, dtype=float)
        self.counts = [int(c) for c in counts]
        if len(self.counts) != len(self.breakpoints) - 1:
            raise ValueError("one node count per subinterval required")
        self.blocks = []
        start = 0
        for a, b, n in zip(self.breakpoints[:-1], self.breakpoints[1:], self.counts):
            self.blocks.append(slice(start, start + n))
            start += n
        self.nodes = np.concatenate([
            lobatto_nodes(n, a, b)
            for a, b, n in zip(self.breakpoints[:-1], self.breakpoints[1:], self.counts)
        ])
        self.size = start

    @classmethod
    def split(cls, total, breakpoints, minimum=8):
        """Distribute roughly ``total`` nodes over the pieces by length."""
        bp = np.asarray(breakpoints, dtype=float)
        lengths = np.diff(bp) / (bp[-1] - bp[0])
        counts = [max(minimum, int(np.ceil(total * ell))) for ell in lengths]
        return cls(bp, counts)

    def diff_matrix(self):
        D = np.zeros((self.size, self.size))
        for s, a, b, n in zip(self.blocks, self.breakpoints[:-1],
                              self.breakpoints[1:], self.counts):
            D[s, s] = diff_matrix(n, a, b)
        return D

    def quadrature_weights(self):
        return np.concatenate([
            clenshaw_curtis_weights(n, a, b)
            for a, b, n in zip(self.breakpoints[:-1], self.breakpoints[1:], self.counts)
        ])

    def interpolate(self, values, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        idx = np.clip(np.searchsorted(self.breakpoints, r, side="right") - 1,
                      0, len(self.counts) - 1)
        for k, s in enumerate(self.blocks):
            sel = idx == k
            if sel.any():
                out[sel] = barycentric_eval(self.nodes[s], values[s], r[sel])
        return out
