"""Road network model: node coordinates, segment lengths, snapping, shortest paths.

The network is undirected. Node and segment ids are dense integers assigned
at load time; ids found in input files are remapped in order of appearance.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import MalformedInputError, NoPathError

EARTH_RADIUS_M = 6_371_000.0


def haversine_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Great-circle distance in meters between two WGS84 points."""
    phi1 = math.radians(lat1)
    phi2 = math.radians(lat2)
    dlam = math.radians(lon2 - lon1)
    a = (
        math.sin((phi2 - phi1) / 2.0) ** 2
        + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(a)))


@dataclass(frozen=True)
class Path:
    """A routed path: segment ids in traversal order plus per-segment lengths."""

    segments: tuple[int, ...]
    nodes: tuple[int, ...]
    seg_lengths_m: tuple[float, ...]
    distance_m: float


@dataclass
class RoadNetwork:
    """Immutable after construction; safe for concurrent read-only queries."""

    node_lat: np.ndarray
    node_lon: np.ndarray
    seg_u: np.ndarray
    seg_v: np.ndarray
    seg_length_m: np.ndarray
    adjacency: list[list[tuple[int, int]]]  # node -> [(neighbor node, segment id)]
    file_node_ids: list = field(default_factory=list)

    @property
    def num_nodes(self) -> int:
        return len(self.node_lat)

    @property
    def num_segments(self) -> int:
        return len(self.seg_length_m)

    @property
    def total_length_m(self) -> float:
        return float(self.seg_length_m.sum())

    def endpoints(self, segment: int) -> tuple[int, int]:
        return int(self.seg_u[segment]), int(self.seg_v[segment])

    def node_coords(self, node: int) -> tuple[float, float]:
        return float(self.node_lat[node]), float(self.node_lon[node])


def build_network(nodes, edges) -> RoadNetwork:
    """Assemble a validated RoadNetwork from in-memory records.

    `nodes` is a sequence of (file_id, lat, lon); `edges` of
    (file_u, file_v, length_m or None). Missing lengths are filled with the
    haversine distance between endpoints. Duplicate undirected edges collapse
    to the shortest one.
    """
    id_map: dict = {}
    lats, lons, file_ids = [], [], []
    for file_id, lat, lon in nodes:
        if file_id in id_map:
            raise MalformedInputError(f"duplicate node id {file_id!r}")
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise MalformedInputError(f"node {file_id!r} has non-finite coordinates")
        id_map[file_id] = len(lats)
        lats.append(float(lat))
        lons.append(float(lon))
        file_ids.append(file_id)

    best: dict[tuple[int, int], float] = {}
    for row_no, (fu, fv, length) in enumerate(edges, start=1):
        if fu not in id_map:
            raise MalformedInputError(f"edge record {row_no}: unknown endpoint id {fu!r}")
        if fv not in id_map:
            raise MalformedInputError(f"edge record {row_no}: unknown endpoint id {fv!r}")
        u, v = id_map[fu], id_map[fv]
        if u == v:
            raise MalformedInputError(f"edge record {row_no}: self-loop at node {fu!r}")
        if length is None:
            length = haversine_m(lats[u], lons[u], lats[v], lons[v])
        length = float(length)
        if not (length > 0.0 and math.isfinite(length)):
            raise MalformedInputError(
                f"edge record {row_no} ({fu!r},{fv!r}): non-positive length {length}"
            )
        key = (u, v) if u < v else (v, u)
        if key not in best or length < best[key]:
            best[key] = length

    seg_u = np.empty(len(best), dtype=np.int64)
    seg_v = np.empty(len(best), dtype=np.int64)
    seg_len = np.empty(len(best), dtype=np.float64)
    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(len(lats))]
    for seg, ((u, v), length) in enumerate(sorted(best.items())):
        seg_u[seg] = u
        seg_v[seg] = v
        seg_len[seg] = length
        adjacency[u].append((v, seg))
        adjacency[v].append((u, seg))
    for neighbors in adjacency:
        neighbors.sort()

    return RoadNetwork(
        node_lat=np.asarray(lats, dtype=np.float64),
        node_lon=np.asarray(lons, dtype=np.float64),
        seg_u=seg_u,
        seg_v=seg_v,
        seg_length_m=seg_len,
        adjacency=adjacency,
        file_node_ids=file_ids,
    )


def _parse_id(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


def load_network(node_source, edge_source) -> RoadNetwork:
    """Load a network from delimited text sources.

    Node header: node_id,lat,lon.  Edge header: u,v[,length_m].
    Sources are open text files or anything csv can iterate.
    """
    node_reader = csv.DictReader(node_source)
    required = {"node_id", "lat", "lon"}
    if node_reader.fieldnames is None or not required.issubset(node_reader.fieldnames):
        raise MalformedInputError(f"node file must have columns {sorted(required)}")
    nodes = []
    for row_no, row in enumerate(node_reader, start=1):
        try:
            nodes.append((_parse_id(row["node_id"]), float(row["lat"]), float(row["lon"])))
        except (TypeError, ValueError) as exc:
            raise MalformedInputError(f"node record {row_no}: {exc}") from exc

    edge_reader = csv.DictReader(edge_source)
    if edge_reader.fieldnames is None or not {"u", "v"}.issubset(edge_reader.fieldnames):
        raise MalformedInputError("edge file must have columns ['u', 'v'] (length_m optional)")
    has_length = "length_m" in (edge_reader.fieldnames or [])
    edges = []
    for row_no, row in enumerate(edge_reader, start=1):
        raw_len = row.get("length_m") if has_length else None
        length = None
        if raw_len is not None and raw_len.strip() != "":
            try:
                length = float(raw_len)
            except ValueError as exc:
                raise MalformedInputError(f"edge record {row_no}: bad length {raw_len!r}") from exc
        edges.append((_parse_id(row["u"]), _parse_id(row["v"]), length))

    return build_network(nodes, edges)


def nearest_node(net: RoadNetwork, lat: float, lon: float) -> int:
    """Node id minimizing haversine distance to (lat, lon); ties go to the smallest id."""
    if net.num_nodes == 0:
        raise MalformedInputError("cannot snap to an empty network")
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise MalformedInputError(f"non-finite query coordinates ({lat}, {lon})")
    phi1 = np.radians(net.node_lat)
    phi2 = math.radians(lat)
    dphi = phi2 - phi1
    dlam = math.radians(lon) - np.radians(net.node_lon)
    a = np.sin(dphi / 2.0) ** 2 + np.cos(phi1) * math.cos(phi2) * np.sin(dlam / 2.0) ** 2
    # argmin returns the first (= smallest) index among exact ties
    return int(np.argmin(a))


def single_source_distances(net: RoadNetwork, root: int) -> np.ndarray:
    """Dijkstra distances in meters from `root` to every node (inf if unreachable)."""
    dist = np.full(net.num_nodes, np.inf)
    dist[root] = 0.0
    heap = [(0.0, root)]
    done = np.zeros(net.num_nodes, dtype=bool)
    while heap:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        for v, seg in net.adjacency[u]:
            nd = d + net.seg_length_m[seg]
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path(net: RoadNetwork, origin: int, dest: int) -> Path:
    """Minimal total-length path from origin to dest.

    Ties between equal-length paths are broken toward the lexicographically
    smallest node sequence, which keeps replays reproducible on grids where
    many shortest paths coexist. Runs Dijkstra rooted at `dest`, then walks
    from `origin` greedily along tight edges (dist[u] == w + dist[v], an exact
    equality that holds bitwise for at least the relaxation parent).
    """
    for name, node in (("origin", origin), ("dest", dest)):
        if not 0 <= node < net.num_nodes:
            raise MalformedInputError(f"{name} node {node} outside 0..{net.num_nodes - 1}")
    if origin == dest:
        return Path((), (origin,), (), 0.0)

    dist = single_source_distances(net, dest)
    if not math.isfinite(dist[origin]):
        raise NoPathError(f"node {dest} is unreachable from node {origin}")

    nodes = [origin]
    segments = []
    lengths = []
    total = 0.0
    u = origin
    while u != dest:
        step = None
        for v, seg in net.adjacency[u]:  # sorted by neighbor id
            if dist[u] == net.seg_length_m[seg] + dist[v]:
                step = (v, seg)
                break
        if step is None:  # float drift left no exactly tight edge; take the tightest
            step = min(
                net.adjacency[u],
                key=lambda vs: (net.seg_length_m[vs[1]] + dist[vs[0]], vs[0]),
            )
        v, seg = step
        length = float(net.seg_length_m[seg])
        nodes.append(v)
        segments.append(seg)
        lengths.append(length)
        total += length
        u = v
    return Path(tuple(segments), tuple(nodes), tuple(lengths), total)


class ShortestPathCache:
    """Memoizes shortest paths per (origin, dest) node pair.

    Trip data reuses stand pairs heavily, so this cuts routing cost by
    orders of magnitude. Not thread-safe under concurrent insertion; either
    prefill single-threaded or give each worker its own cache.
    """

    def __init__(self, net: RoadNetwork):
        self.net = net
        self._paths: dict[tuple[int, int], Path] = {}

    def get(self, origin: int, dest: int) -> Path:
        key = (origin, dest)
        path = self._paths.get(key)
        if path is None:
            path = shortest_path(self.net, origin, dest)
            self._paths[key] = path
        return path

    def __len__(self) -> int:
        return len(self._paths)
