"""Network-namespace backend: one namespace per node, one veth pair per link.

Link delay, loss and rate are enforced with a netem qdisc on both ends of the
pair, so the one-way delay of a link equals its ``delay_us``. Requires Linux,
root (or CAP_NET_ADMIN) and the iproute2 tools.
"""
from __future__ import annotations

import os
import re
import shutil
import subprocess
import sys
import threading

from ..topology import LinkKey, LinkProps
from .base import Backend, BackendError, BackendUnavailable


def unavailable_reason() -> str | None:
    """Why the backend cannot run here, or None if it can."""
    if not sys.platform.startswith("linux"):
        return f"unsupported platform {sys.platform}"
    if hasattr(os, "geteuid") and os.geteuid() != 0:
        return "root privileges required"
    for tool in ("ip", "tc", "ping"):
        if shutil.which(tool) is None:
            return f"{tool} not found on PATH"
    probe = subprocess.run(["ip", "netns", "list"], capture_output=True, text=True)
    if probe.returncode != 0:
        return f"ip netns unusable: {probe.stderr.strip()}"
    return None


def available() -> bool:
    return unavailable_reason() is None


def _netem_args(props: LinkProps) -> list[str]:
    return [
        "netem",
        "delay", f"{props.delay_us}us",
        "loss", f"{props.loss_pct}%",
        "rate", f"{props.rate_mbps}mbit",
    ]


class LinuxNetnsBackend(Backend):
    name = "linux"

    def __init__(self, prefix: str = "oe", record: bool = True):
        reason = unavailable_reason()
        if reason is not None:
            raise BackendUnavailable(reason)
        super().__init__(record=record)
        self.prefix = prefix
        self._ns: dict[str, str] = {}
        self._ifaces: dict[LinkKey, tuple[str, str, int]] = {}
        self._next_ns = 0
        self._next_link = 0
        self._alloc = threading.Lock()

    def _sh(self, *args: str) -> str:
        res = subprocess.run(list(args), capture_output=True, text=True)
        if res.returncode != 0:
            raise BackendError(f"{' '.join(args)}: {res.stderr.strip()}")
        return res.stdout

    def _do_create_node(self, node_id, profile):
        with self._alloc:
            ns = f"{self.prefix}{self._next_ns}"
            self._next_ns += 1
            self._ns[node_id] = ns
        self._sh("ip", "netns", "add", ns)
        self._sh("ip", "-n", ns, "link", "set", "lo", "up")

    def _do_start_node(self, node_id, _):
        pass

    def _set_links(self, node_id: str, state: str) -> None:
        ns = self._ns[node_id]
        for (a, b), (ia, ib, _) in list(self._ifaces.items()):
            if node_id == a:
                self._sh("ip", "-n", ns, "link", "set", ia, state)
            elif node_id == b:
                self._sh("ip", "-n", ns, "link", "set", ib, state)

    def _do_suspend_node(self, node_id, _):
        self._set_links(node_id, "down")

    def _do_resume_node(self, node_id, _):
        self._set_links(node_id, "up")

    def _do_destroy_node(self, node_id, _):
        ns = self._ns.pop(node_id, None)
        if ns is not None:
            self._sh("ip", "netns", "del", ns)

    def addresses(self, key: LinkKey) -> tuple[str, str]:
        idx = self._ifaces[key][2]
        base = idx * 4
        net = f"10.{(base >> 16) & 0xFF}.{(base >> 8) & 0xFF}"
        return f"{net}.{(base & 0xFF) + 1}", f"{net}.{(base & 0xFF) + 2}"

    def _do_add_link(self, key, props):
        a, b = key
        with self._alloc:
            idx = self._next_link
            self._next_link += 1
        ia, ib = f"v{idx}a", f"v{idx}b"
        self._ifaces[key] = (ia, ib, idx)
        na, nb = self._ns[a], self._ns[b]
        self._sh("ip", "link", "add", ia, "netns", na, "type", "veth", "peer", "name", ib, "netns", nb)
        ip_a, ip_b = self.addresses(key)
        for ns, iface, ip in ((na, ia, ip_a), (nb, ib, ip_b)):
            self._sh("ip", "-n", ns, "addr", "add", f"{ip}/30", "dev", iface)
            self._sh("ip", "-n", ns, "link", "set", iface, "up")
            self._sh("ip", "netns", "exec", ns, "tc", "qdisc", "add", "dev", iface, "root", *_netem_args(props))

    def _do_update_link(self, key, props):
        a, b = key
        ia, ib, _ = self._ifaces[key]
        for ns, iface in ((self._ns[a], ia), (self._ns[b], ib)):
            self._sh("ip", "netns", "exec", ns, "tc", "qdisc", "change", "dev", iface, "root", *_netem_args(props))

    def _do_remove_link(self, key, _):
        ia, _ib, _idx = self._ifaces.pop(key)
        self._sh("ip", "-n", self._ns[key[0]], "link", "del", ia)

    def ping_rtt_ms(self, key: LinkKey, count: int = 5) -> float | None:
        """Mean RTT of a real ping across ``key``, None when nothing answered."""
        ip_b = self.addresses(key)[1]
        res = subprocess.run(
            ["ip", "netns", "exec", self._ns[key[0]], "ping", "-c", str(count), "-i", "0.2", "-W", "1", ip_b],
            capture_output=True, text=True,
        )
        m = re.search(r"= [\d.]+/([\d.]+)/", res.stdout)
        return float(m.group(1)) if m else None
