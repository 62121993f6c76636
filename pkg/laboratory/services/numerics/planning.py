"""Polygonal paths that avoid a set of cuts, through a fixed waypoint grid."""
import heapq
import logging
import threading

import numpy as np

from laboratory.exceptions import PathPlanningError
from laboratory.services.numerics.paths import crosses_any, point_segment_distances

logger = logging.getLogger(__name__)

# keeps grid rows and columns off the real and imaginary axes
GRID_SHIFT = complex(0.3137, 0.2718)
VISIBLE_CANDIDATES = 24


class CutAvoidingPlanner:
    """Shortest grid routes from the roots of a search tree to arbitrary targets.

    ``cuts`` is a sequence of (start, end) complex pairs; routes never cross
    them. Grid edges also keep ``clearance`` away from ``points``. The tree
    is rooted at every grid node with modulus at least ``sink_radius``, or
    at ``source`` alone when one is given (the grid still covers the disc
    of radius ``sink_radius``).
    """

    def __init__(self, cuts, points, sink_radius, spacing=0.25, clearance=None, source=None):
        self.starts = np.array([complex(a) for a, _ in cuts], dtype=complex)
        self.ends = np.array([complex(b) for _, b in cuts], dtype=complex)
        self.points = np.array([complex(p) for p in points], dtype=complex)
        self.sink_radius = float(sink_radius)
        self.spacing = float(spacing)
        self.clearance = float(clearance if clearance is not None else spacing / 3)
        self.source = None if source is None else complex(source)
        self._lock = threading.Lock()
        self._tree = None

    def _clear_of_points(self, p, q):
        if len(self.points) == 0:
            return True
        return float(point_segment_distances(self.points, [p], [q]).min()) > self.clearance

    def edge_ok(self, p, q, check_points=True):
        if crosses_any(p, q, self.starts, self.ends):
            return False
        return not check_points or self._clear_of_points(p, q)

    def _build(self):
        half = self.sink_radius * 1.25 + self.spacing
        axis = np.arange(-half, half + self.spacing / 2, self.spacing)
        nodes = (axis[None, :] + 1j * axis[:, None]).ravel() + GRID_SHIFT * self.spacing
        if len(self.starts):
            near_cut = point_segment_distances(nodes, self.starts, self.ends).min(axis=1) <= self.clearance / 2
        else:
            near_cut = np.zeros(len(nodes), dtype=bool)
        if len(self.points):
            near_point = np.abs(nodes[:, None] - self.points[None, :]).min(axis=1) <= self.clearance
        else:
            near_point = np.zeros(len(nodes), dtype=bool)
        nodes = nodes[~(near_cut | near_point)]
        index = {(round(z.real / self.spacing * 8), round(z.imag / self.spacing * 8)): k for k, z in enumerate(nodes)}

        source_edges = []
        if self.source is not None:
            close = np.flatnonzero(np.abs(nodes - self.source) <= 1.5 * self.spacing)
            source_edges = [int(k) for k in close if self.edge_ok(self.source, nodes[k])]
            if not source_edges:
                raise PathPlanningError("source sees no grid node", target=self.source)
            nodes = np.append(nodes, self.source)
        source_index = len(nodes) - 1

        def neighbours(k):
            if self.source is not None and k == source_index:
                yield from source_edges
                return
            z = nodes[k]
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    if dx == 0 and dy == 0:
                        continue
                    w = z + self.spacing * complex(dx, dy)
                    j = index.get((round(w.real / self.spacing * 8), round(w.imag / self.spacing * 8)))
                    if j is not None:
                        yield j

        if self.source is not None:
            roots = [source_index]
        else:
            roots = [k for k, z in enumerate(nodes) if abs(z) >= self.sink_radius]
        distance = {k: 0.0 for k in roots}
        parent = {k: None for k in roots}
        heap = [(0.0, k) for k in roots]
        heapq.heapify(heap)
        while heap:
            d, k = heapq.heappop(heap)
            if d > distance.get(k, np.inf):
                continue
            for j in neighbours(k):
                nd = d + abs(nodes[j] - nodes[k])
                if nd < distance.get(j, np.inf) and self.edge_ok(nodes[k], nodes[j]):
                    distance[j] = nd
                    parent[j] = k
                    heapq.heappush(heap, (nd, j))
        logger.debug(f"waypoint grid: {len(nodes)} nodes, {len(parent)} reachable")
        return nodes, parent

    @property
    def tree(self):
        with self._lock:
            if self._tree is None:
                self._tree = self._build()
            return self._tree

    def is_sink(self, k):
        nodes, parent = self.tree
        return parent.get(k, -1) is None

    def chain(self, k):
        """Grid node indices from the root of the tree down to node k."""
        _, parent = self.tree
        out = [k]
        while parent[out[-1]] is not None:
            out.append(parent[out[-1]])
        return out[::-1]

    def entry_node(self, target):
        """Nearest reachable grid node that sees ``target`` without crossing a cut."""
        nodes, parent = self.tree
        target = complex(target)
        reachable = np.array(list(parent.keys()))
        if len(reachable) == 0:
            raise PathPlanningError("waypoint grid has no reachable nodes", target=target)
        order = reachable[np.argsort(np.abs(nodes[reachable] - target))[:VISIBLE_CANDIDATES]]
        for k in order:
            if self.edge_ok(nodes[k], target, check_points=False):
                return int(k)
        raise PathPlanningError("no grid node sees the target", target=target)

    def route(self, target):
        nodes, _ = self.tree
        k = self.entry_node(target)
        return [complex(nodes[j]) for j in self.chain(k)] + [complex(target)]
