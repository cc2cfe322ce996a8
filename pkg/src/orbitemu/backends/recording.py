from __future__ import annotations

import random
import threading
import time

from .base import NODE_OPS, Backend, reconstruct


class RecordingBackend(Backend):
    """Backend that only logs operations, optionally sleeping to mimic cost.

    Each operation sleeps ``latency_s`` plus uniform jitter in
    ``[0, jitter_s)``; ``op_latency_s`` overrides the constant part per
    operation name (e.g. ``{"start_node": 0.0}``).
    """

    name = "recording"

    def __init__(self, latency_s: float = 0.0, jitter_s: float = 0.0,
                 op_latency_s: dict[str, float] | None = None, seed: int = 0):
        super().__init__(record=True)
        self.latency_s = latency_s
        self.jitter_s = jitter_s
        self.op_latency_s = dict(op_latency_s or {})
        self._rng = random.Random(seed)
        self._rng_lock = threading.Lock()

    def _cost(self, op: str) -> float:
        cost = self.op_latency_s.get(op, self.latency_s)
        if self.jitter_s > 0:
            with self._rng_lock:
                cost += self._rng.uniform(0.0, self.jitter_s)
        return cost

    def _pause(self, op: str) -> None:
        cost = self._cost(op)
        if cost > 0:
            # sleep() may return early on some platforms; spin out the remainder
            deadline = time.perf_counter() + cost
            time.sleep(cost)
            while time.perf_counter() < deadline:
                pass

    def _do_create_node(self, node_id, profile): self._pause("create_node")
    def _do_start_node(self, node_id, _): self._pause("start_node")
    def _do_suspend_node(self, node_id, _): self._pause("suspend_node")
    def _do_resume_node(self, node_id, _): self._pause("resume_node")
    def _do_destroy_node(self, node_id, _): self._pause("destroy_node")
    def _do_add_link(self, key, props): self._pause("add_link")
    def _do_remove_link(self, key, _): self._pause("remove_link")
    def _do_update_link(self, key, props): self._pause("update_link")

    def op_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.ledger:
            counts[e.op] = counts.get(e.op, 0) + 1
        return counts

    def phase_span(self, ops) -> float:
        """Wall time from the first start to the last end of the given ops."""
        sel = [e for e in self.ledger if e.op in ops]
        if not sel:
            return 0.0
        return max(e.t_end for e in sel) - min(e.t_start for e in sel)

    def node_phase_span(self) -> float:
        return self.phase_span(NODE_OPS)

    def reconstructed(self):
        return reconstruct(self.ledger)
