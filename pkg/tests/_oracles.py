"""Independent reference implementations used only by the test suite.

Everything here is deliberately brute force: exhaustive searches and
closed-form laws that the production code must reproduce.  Keeping them
outside the package guarantees the implementations cannot share bugs.
"""

import numpy as np


def gh_brute_force(dx: np.ndarray, dy: np.ndarray) -> float:
    """Exact Gromov-Hausdorff distance by full enumeration.

    Ranges over every pair of maps f: X -> Y and g: Y -> X and takes
    half the minimal distortion of the correspondence graph(f)|graph(g).
    Cost is |Y|^|X| * |X|^|Y|; keep the spaces tiny.
    """
    nx, ny = dx.shape[0], dy.shape[0]
    fs = np.array(np.meshgrid(*[range(ny)] * nx, indexing="ij")).reshape(nx, -1).T
    gs = np.array(np.meshgrid(*[range(nx)] * ny, indexing="ij")).reshape(ny, -1).T
    # distortion of each f alone and each g alone
    dis_f = np.abs(dx[None, :, :] - dy[fs[:, :, None], fs[:, None, :]]).max(axis=(1, 2))
    dis_g = np.abs(dx[gs[:, :, None], gs[:, None, :]] - dy[None, :, :]).max(axis=(1, 2))
    best = np.inf
    for fi in range(fs.shape[0]):
        f = fs[fi]
        base = dis_f[fi]
        if base >= best:
            continue
        # m[b, j] = worst cross mismatch at column j if g[j] = b
        m = np.abs(dx[:, :, None] - dy[f][:, None, :]).max(axis=0)
        cross = m.T[np.arange(ny)[None, :], gs].max(axis=1)
        total = np.maximum(np.maximum(dis_g, cross), base)
        cand = total.min()
        if cand < best:
            best = cand
    return 0.5 * float(best)


def rayleigh_cdf(x: np.ndarray) -> np.ndarray:
    """Law of a standard Brownian meander at time 1."""
    x = np.asarray(x, dtype=float)
    return 1.0 - np.exp(-np.clip(x, 0, None) ** 2 / 2.0)


def gap_survival_probabilities(n: int) -> np.ndarray:
    """P(dual gap walk unabsorbed after 0..n steps), computed afresh.

    The half-gap walk starts at 1, moves -1/0/+1 with probabilities
    1/4, 1/2, 1/4, and is absorbed at 0.  Uses plain arrays, no package
    code.
    """
    probs = np.zeros(n + 2)
    probs[1] = 1.0
    out = [1.0]
    for _ in range(n):
        nxt = np.zeros_like(probs)
        nxt[:-1] += probs[1:] * 0.25
        nxt[1:] += probs[:-1] * 0.25
        nxt += probs * 0.5
        nxt[0] = 0.0
        if nxt.size > 1:
            nxt = np.append(nxt, 0.0)[: probs.size]
        probs = nxt
        out.append(float(probs.sum()))
        if probs[-1] > 0:
            probs = np.append(probs, 0.0)
    return np.array(out)


def strahler_by_pruning(children: dict, root) -> int:
    """Horton-Strahler order of ``root`` by literal pruning simulation.

    One round removes every vertex whose remaining subtree is a bare
    path (no branch point below it); the order of the root equals the
    number of rounds needed to delete the whole tree.  Implemented by
    simulation, without the max-of-children recursion.
    """
    kids = {v: list(c) for v, c in children.items()}
    rounds = 0
    while root in kids:
        rounds += 1
        # bottom-up: a vertex is path-like when it has at most one
        # child and that child is path-like
        path_like = {}
        stack = [(root, False)]
        while stack:
            v, expanded = stack.pop()
            if expanded:
                c = kids[v]
                if len(c) == 0:
                    path_like[v] = True
                elif len(c) == 1:
                    path_like[v] = path_like[c[0]]
                else:
                    path_like[v] = False
            else:
                stack.append((v, True))
                stack.extend((u, False) for u in kids[v])
        doomed = {v for v, flag in path_like.items() if flag}
        kids = {
            v: [u for u in c if u not in doomed]
            for v, c in kids.items()
            if v not in doomed
        }
    return rounds
