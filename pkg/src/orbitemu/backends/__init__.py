from .base import Backend, BackendError, BackendUnavailable, LedgerEntry, reconstruct
from .measure import (
    MeasurementRecord,
    Route,
    Session,
    shortest_path,
    sim_ping,
    sim_throughput,
    sim_throughput_group,
    write_measurements_csv,
)
from .recording import RecordingBackend
from .simulated import NetGraph, SimulatedBackend

BACKENDS = ("recording", "simulated", "linux")


def make_backend(name: str, **kwargs) -> Backend:
    if name == "recording":
        return RecordingBackend(**kwargs)
    if name == "simulated":
        return SimulatedBackend(**kwargs)
    if name == "linux":
        from .linux import LinuxNetnsBackend

        return LinuxNetnsBackend(**kwargs)
    raise ValueError(f"unknown backend {name!r}; choose from {', '.join(BACKENDS)}")


__all__ = [
    "BACKENDS",
    "Backend",
    "BackendError",
    "BackendUnavailable",
    "LedgerEntry",
    "MeasurementRecord",
    "NetGraph",
    "RecordingBackend",
    "Route",
    "Session",
    "SimulatedBackend",
    "make_backend",
    "reconstruct",
    "shortest_path",
    "sim_ping",
    "sim_throughput",
    "sim_throughput_group",
    "write_measurements_csv",
]
