"""Feature knowledge graph: thresholded association network plus hub,
bridge, and community analysis."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from xml.etree import ElementTree
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptyGraph, IoError, NonSquareInput
from .numerics import percentile, seeded_rng


@dataclass
class FeatureGraph:
    nodes: list[str]
    edges: list[tuple[str, str, float]]   # (a, b, weight), a < b, no self-loops
    metadata: dict = field(default_factory=dict)

    def adjacency(self) -> dict[str, dict[str, float]]:
        adj: dict[str, dict[str, float]] = {v: {} for v in self.nodes}
        for a, b, w in self.edges:
            adj[a][b] = w
            adj[b][a] = w
        return adj


@dataclass
class CentralityReport:
    degree: dict[str, int]
    weighted_degree: dict[str, float]
    betweenness: dict[str, float]


@dataclass
class CommunityPartition:
    communities: dict[str, int]
    modularity: float


def build_graph(matrix, names: list[str], mode: str = "percentile",
                q: float = 75.0, tau: float | None = None,
                metric: str = "cramers_v") -> FeatureGraph:
    """Threshold a symmetric association matrix into an undirected graph.

    mode='percentile' computes the cutoff over the upper-triangle
    off-diagonal weights; mode='absolute' uses tau directly. Ties at the
    cutoff are kept (filter is >=). Isolated nodes are retained.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(names):
        raise NonSquareInput(f"matrix shape {m.shape} vs {len(names)} names")
    iu = np.triu_indices(len(names), k=1)
    weights = m[iu]
    if mode == "percentile":
        cutoff = percentile(weights, q) if weights.size else 0.0
    elif mode == "absolute":
        if tau is None:
            raise NonSquareInput("absolute mode needs tau")
        cutoff = tau
    else:
        raise NonSquareInput(f"unknown mode {mode!r}")
    edges = []
    for i, j in zip(*iu):
        w = m[i, j]
        if w >= cutoff:
            a, b = sorted((names[i], names[j]))
            edges.append((a, b, float(w)))
    edges.sort()
    return FeatureGraph(nodes=sorted(names), edges=edges,
                        metadata={"metric": metric, "mode": mode,
                                  "cutoff": float(cutoff)})


def strong_core(g: FeatureGraph, tau: float = 0.30) -> FeatureGraph:
    """Subgraph of edges >= tau; nodes left isolated are dropped."""
    edges = [(a, b, w) for a, b, w in g.edges if w >= tau]
    touched = sorted({v for a, b, _ in edges for v in (a, b)})
    meta = dict(g.metadata)
    meta["strong_core_tau"] = tau
    return FeatureGraph(nodes=touched, edges=edges, metadata=meta)


def centralities(g: FeatureGraph) -> CentralityReport:
    """Degree, weighted degree, and unnormalized Brandes betweenness.

    Betweenness treats the filtered graph as unweighted (hop counts), so it
    reads as "how many thresholded-association shortest paths run through
    this feature".
    """
    adj = g.adjacency()
    degree = {v: len(nb) for v, nb in adj.items()}
    wdegree = {v: float(sum(nb.values())) for v, nb in adj.items()}
    betweenness = {v: 0.0 for v in g.nodes}
    for s in g.nodes:
        # single-source BFS with path counting
        sigma = {v: 0.0 for v in g.nodes}
        dist = {v: -1 for v in g.nodes}
        preds: dict[str, list[str]] = {v: [] for v in g.nodes}
        sigma[s] = 1.0
        dist[s] = 0
        order = []
        queue = deque([s])
        while queue:
            v = queue.popleft()
            order.append(v)
            for w in adj[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    queue.append(w)
                if dist[w] == dist[v] + 1:
                    sigma[w] += sigma[v]
                    preds[w].append(v)
        delta = {v: 0.0 for v in g.nodes}
        for w in reversed(order):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w])
            if w != s:
                betweenness[w] += delta[w]
    # undirected: every pair counted from both endpoints
    betweenness = {v: b / 2.0 for v, b in betweenness.items()}
    return CentralityReport(degree=degree, weighted_degree=wdegree,
                            betweenness=betweenness)


def modularity(g: FeatureGraph, communities: dict[str, int]) -> float:
    """Weighted Newman modularity of a partition."""
    two_m = 2.0 * sum(w for _, _, w in g.edges)
    if two_m == 0.0:
        raise EmptyGraph("graph has no edge weight")
    strength = {v: 0.0 for v in g.nodes}
    for a, b, w in g.edges:
        strength[a] += w
        strength[b] += w
    q = 0.0
    for a, b, w in g.edges:
        if communities[a] == communities[b]:
            q += w / two_m * 2.0
    for v in g.nodes:
        for u in g.nodes:
            if communities[u] == communities[v]:
                q -= strength[u] * strength[v] / (two_m * two_m)
    return q


def detect_communities(g: FeatureGraph, seed: int = 0) -> CommunityPartition:
    """Greedy weighted-modularity agglomeration (Louvain-style local moving
    followed by community merges), resolution 1.0.

    Node visitation order is shuffled once under the seed, so the partition
    is deterministic for a given (graph, seed). The result never scores
    below the all-singletons or the single-community partition.
    """
    if not g.edges:
        raise EmptyGraph("community detection needs at least one edge")
    rng = seeded_rng(seed)
    comm = _local_moving(g, rng)
    comm = _merge_phase(g, comm)

    q = modularity(g, comm)
    single = {v: 0 for v in g.nodes}
    if modularity(g, single) > q:
        comm, q = single, modularity(g, single)

    remap: dict[int, int] = {}
    for v in sorted(g.nodes):
        if comm[v] not in remap:
            remap[comm[v]] = len(remap)
    communities = {v: remap[comm[v]] for v in g.nodes}
    return CommunityPartition(communities=communities,
                              modularity=modularity(g, communities))


def _local_moving(g: FeatureGraph, rng) -> dict[str, int]:
    """Relocate single nodes while any move improves modularity."""
    adj = g.adjacency()
    two_m = 2.0 * sum(w for _, _, w in g.edges)
    strength = {v: float(sum(adj[v].values())) for v in g.nodes}
    comm = {v: i for i, v in enumerate(g.nodes)}
    comm_strength = {i: strength[v] for i, v in enumerate(g.nodes)}

    nodes = list(g.nodes)
    visit = [nodes[i] for i in rng.permutation(len(nodes))]

    moved = True
    while moved:
        moved = False
        for v in visit:
            c_old = comm[v]
            comm_strength[c_old] -= strength[v]
            links: dict[int, float] = {}
            for u, w in adj[v].items():
                links[comm[u]] = links.get(comm[u], 0.0) + w
            base = links.get(c_old, 0.0) - strength[v] * comm_strength[c_old] / two_m
            best_c, best_gain = c_old, 0.0
            for c, w_in in sorted(links.items()):
                gain = (w_in - strength[v] * comm_strength[c] / two_m) - base
                if gain > best_gain + 1e-12:
                    best_gain, best_c = gain, c
            comm[v] = best_c
            comm_strength[best_c] = comm_strength.get(best_c, 0.0) + strength[v]
            if best_c != c_old:
                moved = True
    return comm


def _merge_phase(g: FeatureGraph, comm: dict[str, int]) -> dict[str, int]:
    """Merge whole communities while the best merge still improves Q."""
    two_m = 2.0 * sum(w for _, _, w in g.edges)
    while True:
        labels = sorted(set(comm.values()))
        strength = {c: 0.0 for c in labels}
        between: dict[tuple[int, int], float] = {}
        for a, b, w in g.edges:
            strength[comm[a]] += w
            strength[comm[b]] += w
            if comm[a] != comm[b]:
                key = tuple(sorted((comm[a], comm[b])))
                between[key] = between.get(key, 0.0) + w
        best_pair, best_gain = None, 1e-12
        for (ca, cb), w_ab in sorted(between.items()):
            gain = 2.0 * (w_ab / two_m - strength[ca] * strength[cb] / (two_m * two_m))
            if gain > best_gain:
                best_gain, best_pair = gain, (ca, cb)
        if best_pair is None:
            return comm
        ca, cb = best_pair
        comm = {v: ca if c == cb else c for v, c in comm.items()}


# --------------------------------------------------------------------------
# serialization


def export_graph(g: FeatureGraph, path, fmt: str = "graphml",
                 partition: CommunityPartition | None = None,
                 cent: CentralityReport | None = None) -> None:
    """Write the graph with weight/community/centrality attributes.

    Nodes and edges are emitted in lexicographic order so output bytes are
    stable across runs.
    """
    if fmt == "graphml":
        text = _render_graphml(g, partition, cent)
    elif fmt == "dot":
        text = _render_dot(g, partition, cent)
    else:
        raise IoError(f"unknown format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _node_attrs(v, partition, cent):
    attrs = {}
    if partition is not None:
        attrs["community"] = partition.communities[v]
    if cent is not None:
        attrs["degree"] = cent.degree[v]
        attrs["wdegree"] = cent.weighted_degree[v]
        attrs["betweenness"] = cent.betweenness[v]
    return attrs


_GRAPHML_KEYS = [
    ("community", "node", "int"),
    ("degree", "node", "int"),
    ("wdegree", "node", "double"),
    ("betweenness", "node", "double"),
    ("weight", "edge", "double"),
]


def _render_graphml(g, partition, cent):
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
    ]
    for name, domain, typ in _GRAPHML_KEYS:
        lines.append(
            f'  <key id="{name}" for="{domain}" attr.name="{name}" attr.type="{typ}"/>'
        )
    lines.append('  <graph id="features" edgedefault="undirected">')
    for v in sorted(g.nodes):
        attrs = _node_attrs(v, partition, cent)
        if attrs:
            lines.append(f'    <node id="{escape(v)}">')
            for key, val in attrs.items():
                lines.append(f'      <data key="{key}">{val!r}</data>')
            lines.append('    </node>')
        else:
            lines.append(f'    <node id="{escape(v)}"/>')
    for a, b, w in sorted(g.edges):
        lines.append(f'    <edge source="{escape(a)}" target="{escape(b)}">')
        lines.append(f'      <data key="weight">{w!r}</data>')
        lines.append('    </edge>')
    lines.append('  </graph>')
    lines.append('</graphml>')
    return "\n".join(lines) + "\n"


def _render_dot(g, partition, cent):
    lines = ["graph features {"]
    for v in sorted(g.nodes):
        attrs = _node_attrs(v, partition, cent)
        attr_text = ", ".join(f'{k}="{val}"' for k, val in attrs.items())
        lines.append(f'  "{v}" [{attr_text}];' if attr_text else f'  "{v}";')
    for a, b, w in sorted(g.edges):
        lines.append(f'  "{a}" -- "{b}" [weight="{w!r}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def load_graphml(path) -> FeatureGraph:
    """Re-import a GraphML export (node ids, edges, and weights)."""
    try:
        tree = ElementTree.parse(path)
    except (OSError, ElementTree.ParseError) as exc:
        raise IoError(str(exc)) from exc
    ns = {"g": "http://graphml.graphdrawing.org/xmlns"}
    root = tree.getroot()
    nodes = []
    edges = []
    for node in root.iter("{http://graphml.graphdrawing.org/xmlns}node"):
        nodes.append(node.attrib["id"])
    for edge in root.iter("{http://graphml.graphdrawing.org/xmlns}edge"):
        a, b = edge.attrib["source"], edge.attrib["target"]
        w = 1.0
        for data in edge:
            if data.attrib.get("key") == "weight":
                w = float(data.text)
        a, b = sorted((a, b))
        edges.append((a, b, w))
    return FeatureGraph(nodes=sorted(nodes), edges=sorted(edges))
