"""River deltas of the arrow field and their tree representations.

The delta of a walker site is the set of sites whose flow passes
through it.  Its depth equals (number of dual steps until the two dual
neighbours of the root coalesce) minus one; the test suite certifies
this identity by exhaustive enumeration of small light cones.  The
extraction here is envelope-first: the two dual trajectories are run to
their meeting and each level is then filled by testing forward arrows
against the previous level, so the primal dynamics decide membership
while the dual envelope only bounds the candidate range.

Trees carry their edge weight as an exact rational; floats appear only
when a tree is converted to a finite metric space.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import ParityError, Site, envelope_walk, even_site

__all__ = [
    "RootedTree",
    "TreeSizeError",
    "extract_cluster",
    "extract_dual_tree",
    "scale_tree",
    "tree_metric",
    "tree_diameter",
    "tree_to_json",
    "tree_from_json",
    "tree_to_newick",
    "tree_from_newick",
    "save_tree",
    "load_tree",
]

TREE_SCHEMA = "scheidegger-tree/1"


class TreeSizeError(RuntimeError):
    """A tree exceeded the configured size cap for a dense operation."""


@dataclass
class RootedTree:
    """Rooted tree with uniform exact-rational edge weights.

    Nodes are opaque hashable ids; lattice trees use (x, t) tuples.
    ``parent`` omits the root.  ``truncated`` marks trees cut by a depth
    cap, so tail-sensitive consumers can treat them as censored rather
    than complete observations.
    """

    root: object
    nodes: list
    parent: dict
    edge_weight: Fraction
    depth: int
    truncated: bool = False
    orientation: str = "abstract"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.edge_weight <= 0:
            raise ValueError("edge weight must be positive")
        if self.root not in set(self.nodes):
            raise ValueError("root must be one of the nodes")

    def children_map(self) -> dict:
        kids: dict = {node: [] for node in self.nodes}
        for child, par in self.parent.items():
            kids[par].append(child)
        return kids

    def node_depths(self) -> dict:
        """Hop count from each node up to the root."""
        depths = {self.root: 0}
        for node in self.nodes:
            chain = []
            v = node
            while v not in depths:
                chain.append(v)
                v = self.parent[v]
            base = depths[v]
            for offset, u in enumerate(reversed(chain), start=1):
                depths[u] = base + offset
        return depths

    def __len__(self) -> int:
        return len(self.nodes)


def extract_cluster(env, root: Site, max_depth: int | None = None) -> RootedTree:
    """Delta of ``root``: every site whose flow reaches it.

    Envelope-first search: the two dual neighbours' trajectories bound
    each level's candidates, and a candidate joins level s exactly when
    its arrow sends it into level s-1.  Terminates when a level empties;
    a ``max_depth`` cut marks the tree truncated.
    """
    if root.kind != "even":
        raise ParityError("deltas are rooted at walker sites")
    cap = max_depth if max_depth is not None else _DEFAULT_ENVELOPE_CAP
    left, right, met = envelope_walk(env, root, cap + 1)
    nodes: list = [root.coords]
    parent: dict = {}
    prev = np.array([root.x], dtype=np.int64)
    depth = 0
    truncated = False
    s = 0
    while True:
        s += 1
        if max_depth is not None and s > max_depth:
            # reaching the cap with a live level means deeper nodes exist
            # unless the envelope closed exactly at the next level
            truncated = not met or len(left) - 1 > s
            break
        if s > len(left) - 1:
            if met:
                break
            raise TreeSizeError(
                f"envelope exceeded {cap} levels without coalescing; "
                "pass max_depth to extract a truncated delta"
            )
        lo, hi = left[s], right[s]
        if hi - lo < 2:
            break
        cand = np.arange(lo + 1, hi, 2, dtype=np.int64)
        t_level = root.t - s
        step_to = cand + env.arrows(cand, t_level).astype(np.int64)
        keep = np.isin(step_to, prev)
        level = cand[keep]
        if level.size == 0:
            break
        for y, up in zip(level.tolist(), step_to[keep].tolist()):
            nodes.append((y, t_level))
            parent[(y, t_level)] = (up, t_level + 1)
        prev = level
        depth = s
    return RootedTree(
        root=root.coords,
        nodes=nodes,
        parent=parent,
        edge_weight=Fraction(1),
        depth=depth,
        truncated=truncated,
        orientation="forward",
        meta={"envelope_met": met},
    )


_DEFAULT_ENVELOPE_CAP = 1_000_000


def extract_dual_tree(env, root: Site, max_depth: int | None = None) -> RootedTree:
    """Dual tree enclosing the delta of ``root``.

    Nodes are the dual sites between (and including) the two envelope
    trajectories, level by level; each node's parent is its dual step.
    The tree is rooted at the coalescence point and its depth equals the
    coalescence level.
    """
    if root.kind != "even":
        raise ParityError("dual trees are anchored at a walker site")
    cap = max_depth if max_depth is not None else _DEFAULT_ENVELOPE_CAP
    left, right, met = envelope_walk(env, root, cap)
    levels = len(left) - 1
    truncated = not met
    if truncated and max_depth is None:
        raise TreeSizeError(
            f"envelope exceeded {cap} levels without coalescing; "
            "pass max_depth to extract a truncated dual tree"
        )
    nodes: list = []
    parent: dict = {}
    for s in range(levels + 1):
        t_level = root.t - s
        for y in range(int(left[s]), int(right[s]) + 1, 2):
            nodes.append((y, t_level))
    for s in range(levels):
        t_level = root.t - s
        for y in range(int(left[s]), int(right[s]) + 1, 2):
            b = env.arrow_at(y, t_level - 1)
            parent[(y, t_level)] = (y - b, t_level - 1)
    if met:
        tree_root = (int(left[levels]), root.t - levels)
    else:
        # no coalescence within the cap: synthesise a root below the cut
        tree_root = ("cut", root.t - levels - 1)
        nodes.append(tree_root)
        for y in range(int(left[levels]), int(right[levels]) + 1, 2):
            parent[(y, root.t - levels)] = tree_root
    return RootedTree(
        root=tree_root,
        nodes=nodes,
        parent=parent,
        edge_weight=Fraction(1),
        depth=levels if met else levels + 1,
        truncated=truncated,
        orientation="dual",
        meta={"coalescence_level": levels if met else None, "anchor": root.coords},
    )


def scale_tree(tree: RootedTree, n: int) -> RootedTree:
    """Same tree with every edge carrying weight 1/n."""
    if n <= 0:
        raise ValueError("scale index must be a positive integer")
    return RootedTree(
        root=tree.root,
        nodes=list(tree.nodes),
        parent=dict(tree.parent),
        edge_weight=Fraction(1, n),
        depth=tree.depth,
        truncated=tree.truncated,
        orientation=tree.orientation,
        meta=dict(tree.meta, scale=n),
    )


def tree_metric(tree: RootedTree, size_cap: int = 2000):
    """Path-length metric of the tree as a finite metric space.

    Hop counts are computed exactly and scaled by the rational edge
    weight; the float matrix is produced once at the boundary, and the
    exact integer hop matrix rides along so tolerance-zero four-point
    checks can avoid rounding entirely.
    """
    from .metric import FiniteMetricSpace

    m = len(tree.nodes)
    if m > size_cap:
        raise TreeSizeError(
            f"tree has {m} nodes, above the size cap {size_cap}; "
            "sample the tree or raise the cap explicitly"
        )
    index = {node: i for i, node in enumerate(tree.nodes)}
    kids = tree.children_map()
    hops = np.zeros((m, m), dtype=np.int64)
    for node in tree.nodes:
        i = index[node]
        # breadth-first sweep over the undirected tree
        stack = [(node, 0)]
        seen = {node}
        while stack:
            v, d = stack.pop()
            hops[i, index[v]] = d
            nbrs = list(kids[v])
            if v in tree.parent:
                nbrs.append(tree.parent[v])
            for u in nbrs:
                if u not in seen:
                    seen.add(u)
                    stack.append((u, d + 1))
    w = float(tree.edge_weight)
    labels = [_node_label(v) for v in tree.nodes]
    return FiniteMetricSpace(
        labels=labels,
        dist=hops * w,
        hops=hops,
        scale=tree.edge_weight,
        meta={
            "orientation": tree.orientation,
            "root_index": index[tree.root],
            "truncated": tree.truncated,
        },
    )


def tree_diameter(tree: RootedTree) -> Fraction:
    """Weighted diameter via two sweeps, without a distance matrix."""
    kids = tree.children_map()

    def farthest(start):
        best, best_d = start, 0
        stack = [(start, 0)]
        seen = {start}
        while stack:
            v, d = stack.pop()
            if d > best_d:
                best, best_d = v, d
            nbrs = list(kids[v])
            if v in tree.parent:
                nbrs.append(tree.parent[v])
            for u in nbrs:
                if u not in seen:
                    seen.add(u)
                    stack.append((u, d + 1))
        return best, best_d

    a, _ = farthest(tree.root)
    _, d = farthest(a)
    return tree.edge_weight * d


def _node_label(node) -> str:
    if isinstance(node, tuple) and len(node) == 2:
        return f"{node[0]}_{node[1]}"
    return str(node)


def tree_to_json(tree: RootedTree) -> dict:
    nodes = list(tree.nodes)
    index = {node: i for i, node in enumerate(nodes)}
    parent_idx = [index[tree.parent[v]] if v in tree.parent else None for v in nodes]
    return {
        "schema": TREE_SCHEMA,
        "orientation": tree.orientation,
        "edge_weight": str(tree.edge_weight),
        "depth": tree.depth,
        "truncated": tree.truncated,
        "root": index[tree.root],
        "nodes": [list(v) if isinstance(v, tuple) else v for v in nodes],
        "parent": parent_idx,
    }


def tree_from_json(payload: dict) -> RootedTree:
    if payload.get("schema") != TREE_SCHEMA:
        raise ValueError(f"unsupported tree schema {payload.get('schema')!r}")
    nodes = [tuple(v) if isinstance(v, list) else v for v in payload["nodes"]]
    parent = {}
    for i, p in enumerate(payload["parent"]):
        if p is not None:
            parent[nodes[i]] = nodes[p]
    return RootedTree(
        root=nodes[payload["root"]],
        nodes=nodes,
        parent=parent,
        edge_weight=Fraction(payload["edge_weight"]),
        depth=payload["depth"],
        truncated=payload["truncated"],
        orientation=payload.get("orientation", "abstract"),
    )


def save_tree(tree: RootedTree, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(tree_to_json(tree), fh, sort_keys=True)
        fh.write("\n")


def load_tree(path) -> RootedTree:
    with open(path, encoding="utf-8") as fh:
        return tree_from_json(json.load(fh))


def tree_to_newick(tree: RootedTree) -> str:
    """Newick serialisation with branch lengths; node names keep ids."""
    kids = tree.children_map()
    w = float(tree.edge_weight)
    out: list[str] = []

    # iterative post-order so deep chains cannot overflow the stack
    stack: list[tuple[object, bool]] = [(tree.root, False)]
    pieces: dict = {}
    while stack:
        node, expanded = stack.pop()
        if not expanded:
            stack.append((node, True))
            for child in kids[node]:
                stack.append((child, False))
        else:
            name = _node_label(node)
            if kids[node]:
                inner = ",".join(pieces.pop(child) for child in kids[node])
                body = f"({inner}){name}"
            else:
                body = name
            if node in tree.parent:
                pieces[node] = f"{body}:{w:.17g}"
            else:
                pieces[node] = body
    out.append(pieces[tree.root])
    return out[0] + ";"


_TOKEN = re.compile(r"\(|\)|,|;|[^(),;:]+(?::[0-9.eE+-]+)?")


def tree_from_newick(text: str, orientation: str = "abstract") -> RootedTree:
    """Parse the subset of Newick produced by :func:`tree_to_newick`."""
    tokens = _TOKEN.findall(text.strip())
    if not tokens or tokens[-1] != ";":
        raise ValueError("newick text must end with ';'")
    tokens = tokens[:-1]
    pos = 0
    weights: list[float] = []

    def parse_node():
        nonlocal pos
        children = []
        if pos < len(tokens) and tokens[pos] == "(":
            pos += 1
            children.append(parse_node())
            while tokens[pos] == ",":
                pos += 1
                children.append(parse_node())
            if tokens[pos] != ")":
                raise ValueError("unbalanced parentheses in newick text")
            pos += 1
        label = tokens[pos]
        pos += 1
        if ":" in label:
            name, length = label.rsplit(":", 1)
            weights.append(float(length))
        else:
            name = label
        node = _parse_label(name)
        return (node, children)

    root_entry = parse_node()
    if pos != len(tokens):
        raise ValueError("trailing tokens in newick text")
    nodes: list = []
    parent: dict = {}
    stack = [root_entry]
    while stack:
        node, children = stack.pop()
        nodes.append(node)
        for child, grand in children:
            parent[child] = node
            stack.append((child, grand))
    weight = Fraction(repr(weights[0])) if weights else Fraction(1)
    depths = {root_entry[0]: 0}
    depth = 0
    for node in nodes:
        chain = []
        v = node
        while v not in depths:
            chain.append(v)
            v = parent[v]
        base = depths[v]
        for off, u in enumerate(reversed(chain), start=1):
            depths[u] = base + off
        depth = max(depth, depths[node])
    return RootedTree(
        root=root_entry[0],
        nodes=nodes,
        parent=parent,
        edge_weight=weight,
        depth=depth,
        orientation=orientation,
    )


def _parse_label(name: str):
    parts = name.split("_")
    if len(parts) == 2:
        try:
            return (int(parts[0]), int(parts[1]))
        except ValueError:
            return name
    return name
