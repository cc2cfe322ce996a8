"""The operation contract every network backend implements."""
from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Iterable

from ..topology import LinkKey, LinkProps, NodeState

NODE_OPS = ("create_node", "start_node", "suspend_node", "resume_node", "destroy_node")
LINK_OPS = ("add_link", "remove_link", "update_link")


class BackendError(RuntimeError):
    pass


class BackendUnavailable(BackendError):
    pass


@dataclass(frozen=True)
class LedgerEntry:
    seq: int
    op: str
    target: str | LinkKey
    detail: object
    t_start: float
    t_end: float


class Backend:
    """Base class holding the authoritative node/link state of a backend.

    Subclasses hook ``_do_<op>`` methods to drive the real (or simulated)
    network. State checks run under a lock; the hooks run outside it so that
    calls on distinct links can proceed concurrently.
    """

    name = "base"

    def __init__(self, record: bool = True):
        self._lock = threading.Lock()
        self.nodes: dict[str, NodeState] = {}
        self.profiles: dict[str, str | None] = {}
        self.links: dict[LinkKey, LinkProps] = {}
        self.record = record
        self.ledger: list[LedgerEntry] = []
        self._seq = 0

    # -- contract ---------------------------------------------------------

    def create_node(self, node_id: str, profile: str | None = None) -> None:
        with self._lock:
            if node_id in self.nodes:
                raise BackendError(f"node {node_id} already exists")
            self.nodes[node_id] = NodeState.CREATED
            self.profiles[node_id] = profile
        self._run("create_node", node_id, profile)

    def start_node(self, node_id: str) -> None:
        self._node_transition(node_id, "start_node", (NodeState.CREATED,), NodeState.STARTED)

    def suspend_node(self, node_id: str) -> None:
        with self._lock:
            attached = [k for k in self.links if node_id in k]
        if attached:
            raise BackendError(f"cannot suspend {node_id}: {len(attached)} links still attached")
        self._node_transition(node_id, "suspend_node", (NodeState.STARTED,), NodeState.SUSPENDED)

    def resume_node(self, node_id: str) -> None:
        self._node_transition(node_id, "resume_node", (NodeState.SUSPENDED,), NodeState.STARTED)

    def destroy_node(self, node_id: str) -> None:
        with self._lock:
            if node_id not in self.nodes:
                return
            attached = [k for k in self.links if node_id in k]
        for key in attached:
            self.remove_link(key)
        self._run("destroy_node", node_id, None)
        with self._lock:
            self.nodes.pop(node_id, None)
            self.profiles.pop(node_id, None)

    def add_link(self, key: LinkKey, props: LinkProps) -> None:
        with self._lock:
            if key in self.links:
                raise BackendError(f"link {key} already exists")
            for end in key:
                if self.nodes.get(end) is not NodeState.STARTED:
                    raise BackendError(f"link {key}: endpoint {end} is not started")
            self.links[key] = props
        self._run("add_link", key, props)

    def remove_link(self, key: LinkKey) -> None:
        with self._lock:
            if key not in self.links:
                return
            del self.links[key]
        self._run("remove_link", key, None)

    def update_link(self, key: LinkKey, props: LinkProps) -> None:
        with self._lock:
            if key not in self.links:
                raise BackendError(f"update of nonexistent link {key}")
            self.links[key] = props
        self._run("update_link", key, props)

    # -- helpers ----------------------------------------------------------

    def is_empty(self) -> bool:
        with self._lock:
            return not self.nodes and not self.links

    def close(self) -> None:
        """Release resources beyond node/link state (nothing by default)."""

    def _node_transition(self, node_id, op, allowed, new_state):
        with self._lock:
            cur = self.nodes.get(node_id)
            if cur is None:
                raise BackendError(f"{op}: unknown node {node_id}")
            if cur not in allowed:
                raise BackendError(f"{op}: node {node_id} is {cur.value}")
            self.nodes[node_id] = new_state
        self._run(op, node_id, None)

    def _run(self, op: str, target, detail) -> None:
        t0 = time.perf_counter()
        getattr(self, "_do_" + op)(target, detail)
        t1 = time.perf_counter()
        if self.record:
            with self._lock:
                self.ledger.append(LedgerEntry(self._seq, op, target, detail, t0, t1))
                self._seq += 1

    def _do_create_node(self, node_id, profile): pass
    def _do_start_node(self, node_id, _): pass
    def _do_suspend_node(self, node_id, _): pass
    def _do_resume_node(self, node_id, _): pass
    def _do_destroy_node(self, node_id, _): pass
    def _do_add_link(self, key, props): pass
    def _do_remove_link(self, key, _): pass
    def _do_update_link(self, key, props): pass


def reconstruct(entries: Iterable[LedgerEntry]) -> tuple[dict[str, NodeState], dict[LinkKey, LinkProps]]:
    """Fold a ledger back into node states and link properties."""
    nodes: dict[str, NodeState] = {}
    links: dict[LinkKey, LinkProps] = {}
    for e in sorted(entries, key=lambda e: e.seq):
        if e.op == "create_node":
            nodes[e.target] = NodeState.CREATED
        elif e.op in ("start_node", "resume_node"):
            nodes[e.target] = NodeState.STARTED
        elif e.op == "suspend_node":
            nodes[e.target] = NodeState.SUSPENDED
        elif e.op == "destroy_node":
            nodes.pop(e.target, None)
        elif e.op in ("add_link", "update_link"):
            links[e.target] = e.detail
        elif e.op == "remove_link":
            links.pop(e.target, None)
    return nodes, links
