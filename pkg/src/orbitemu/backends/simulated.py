"""In-process network model driven by backend operations."""
from __future__ import annotations

import threading

from ..topology import LinkKey, LinkProps, NodeState
from .base import Backend

TOPOLOGY_MODES = ("grid", "star")


class NetGraph:
    """Weighted undirected graph mirroring the operations applied to a backend.

    ``mode="star"`` keeps the same link table but routes every pair through a
    single hub, the way a hypervisor-routed emulator does.
    """

    def __init__(self, mode: str = "grid"):
        if mode not in TOPOLOGY_MODES:
            raise ValueError(f"unknown topology mode {mode!r}")
        self.mode = mode
        self.nodes: dict[str, NodeState] = {}
        self.links: dict[LinkKey, LinkProps] = {}
        self._adj: dict[str, dict[str, LinkProps]] = {}
        self.version = 0
        self.lock = threading.RLock()
        self.route_cache: dict = {}

    def set_node(self, node: str, state: NodeState) -> None:
        with self.lock:
            self.nodes[node] = state
            self._adj.setdefault(node, {})
            self.version += 1

    def drop_node(self, node: str) -> None:
        with self.lock:
            for other in list(self._adj.get(node, {})):
                self.drop_link((node, other) if node <= other else (other, node))
            self.nodes.pop(node, None)
            self._adj.pop(node, None)
            self.version += 1

    def set_link(self, key: LinkKey, props: LinkProps) -> None:
        a, b = key
        with self.lock:
            self.links[key] = props
            self._adj.setdefault(a, {})[b] = props
            self._adj.setdefault(b, {})[a] = props
            self.version += 1

    def drop_link(self, key: LinkKey) -> None:
        a, b = key
        with self.lock:
            if self.links.pop(key, None) is not None:
                self._adj[a].pop(b, None)
                self._adj[b].pop(a, None)
                self.version += 1

    def neighbors(self, node: str) -> dict[str, LinkProps]:
        return self._adj.get(node, {})

    def link(self, a: str, b: str) -> LinkProps:
        return self.links[(a, b) if a <= b else (b, a)]

    @classmethod
    def from_links(cls, links: dict[LinkKey, LinkProps], mode: str = "grid",
                   nodes: dict[str, NodeState] | None = None) -> "NetGraph":
        g = cls(mode)
        for key in links:
            for end in key:
                g.set_node(end, NodeState.STARTED)
        for n, s in (nodes or {}).items():
            g.set_node(n, s)
        for key, props in links.items():
            g.set_link(key, props)
        return g


class SimulatedBackend(Backend):
    """Backend whose network is a :class:`NetGraph` used by the measurement oracles."""

    name = "simulated"

    def __init__(self, mode: str = "grid", record: bool = True):
        super().__init__(record=record)
        self.graph = NetGraph(mode)

    def _do_create_node(self, node_id, profile):
        self.graph.set_node(node_id, NodeState.CREATED)

    def _do_start_node(self, node_id, _):
        self.graph.set_node(node_id, NodeState.STARTED)

    def _do_suspend_node(self, node_id, _):
        self.graph.set_node(node_id, NodeState.SUSPENDED)

    def _do_resume_node(self, node_id, _):
        self.graph.set_node(node_id, NodeState.STARTED)

    def _do_destroy_node(self, node_id, _):
        self.graph.drop_node(node_id)

    def _do_add_link(self, key, props):
        self.graph.set_link(key, props)

    def _do_update_link(self, key, props):
        self.graph.set_link(key, props)

    def _do_remove_link(self, key, _):
        self.graph.drop_link(key)
