"""
Binary persistence for fields, trajectories and empirical measures.

Snapshot record (little endian):
    magic "SNSE" | version u32 | n u32 x3 | L_i f64 x3 | nu f64 | time f64 |
    (re, im) f64 pairs for the three components of every stored half-lattice
    wavevector, in lexicographic (k1, k2, k3) order with k1, k2 ascending from
    -n/2 and k3 from 0.

Trajectory container: snapshot records back to back, then a JSON index footer
(offsets, interval, provenance, budget integrals), its byte length as u64 and
the magic "SNTX".

Measure file: magic "SNSM" | header length u64 | JSON header | atom snapshot
records | weights as f64.
"""
import json
from typing import Any, Dict, List, Tuple

import numpy as np

from config.settings import (
    MEASURE_MAGIC,
    SNAPSHOT_MAGIC,
    SNAPSHOT_VERSION,
    TRAJECTORY_FOOTER_MAGIC,
)
from config.logging_config import logger
from core.errors import LatticeError
from core.lattice import SpectralField, WaveVectorLattice
from core.measures import EmpiricalMeasure
from core.trajectory import Trajectory
from utils.helpers import atomic_write_bytes

HEADER_DTYPE = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("n", "<u4", (3,)),
    ("periods", "<f8", (3,)),
    ("nu", "<f8"),
    ("time", "<f8"),
])

_U64 = np.dtype("<u8")


def encode_snapshot(u: SpectralField, nu: float, time: float) -> bytes:
    lattice = u.lattice
    header = np.zeros((), dtype=HEADER_DTYPE)
    header["magic"] = SNAPSHOT_MAGIC
    header["version"] = SNAPSHOT_VERSION
    header["n"] = (lattice.n,) * 3
    header["periods"] = lattice.periods
    header["nu"] = nu
    header["time"] = time
    ordered = np.fft.fftshift(u.coeffs, axes=(1, 2)).transpose(1, 2, 3, 0)
    body = np.ascontiguousarray(ordered, dtype="<c16")
    return header.tobytes() + body.tobytes()


def decode_snapshot(buffer: bytes, offset: int = 0) -> Tuple[SpectralField, float, float, int]:
    """Decode one record; returns (field, nu, time, offset after the record)."""
    header = np.frombuffer(buffer, dtype=HEADER_DTYPE, count=1, offset=offset)[0]
    if bytes(header["magic"]) != SNAPSHOT_MAGIC:
        raise ValueError(f"bad snapshot magic at offset {offset}")
    if int(header["version"]) != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {int(header['version'])}")
    sizes = {int(v) for v in header["n"]}
    if len(sizes) != 1:
        raise LatticeError(f"anisotropic resolutions {tuple(header['n'])} are not supported")
    lattice = WaveVectorLattice(sizes.pop(), tuple(float(p) for p in header["periods"]))
    n, m = lattice.n, lattice.n // 2 + 1
    start = offset + HEADER_DTYPE.itemsize
    count = 3 * n * n * m
    body = np.frombuffer(buffer, dtype="<c16", count=count, offset=start).reshape(n, n, m, 3)
    coeffs = np.fft.ifftshift(body.transpose(3, 0, 1, 2), axes=(1, 2)).astype(np.complex128)
    end = start + count * 16
    return SpectralField(lattice, coeffs), float(header["nu"]), float(header["time"]), end


def write_snapshot(path: str, u: SpectralField, nu: float, time: float) -> None:
    atomic_write_bytes(path, encode_snapshot(u, nu, time))


def read_snapshot(path: str) -> Tuple[SpectralField, float, float]:
    with open(path, "rb") as f:
        buffer = f.read()
    u, nu, time, _ = decode_snapshot(buffer)
    return u, nu, time


def _float_list(values) -> List[float]:
    return [float(v) for v in values]


def encode_trajectory(traj: Trajectory, nu: float) -> bytes:
    chunks: List[bytes] = []
    offsets: List[int] = []
    position = 0
    for t, u in zip(traj.times, traj.states):
        record = encode_snapshot(u, nu, float(t))
        offsets.append(position)
        position += len(record)
        chunks.append(record)
    footer: Dict[str, Any] = {
        "offsets": offsets,
        "interval": _float_list(traj.interval),
        "provenance": traj.provenance,
        "cum_dissipation": None if traj.cum_dissipation is None else _float_list(traj.cum_dissipation),
        "cum_work": None if traj.cum_work is None else _float_list(traj.cum_work),
    }
    footer_bytes = json.dumps(footer, sort_keys=True).encode("utf-8")
    chunks.append(footer_bytes)
    chunks.append(np.array(len(footer_bytes), dtype=_U64).tobytes())
    chunks.append(TRAJECTORY_FOOTER_MAGIC)
    return b"".join(chunks)


def decode_trajectory(buffer: bytes) -> Tuple[Trajectory, float]:
    if buffer[-4:] != TRAJECTORY_FOOTER_MAGIC:
        raise ValueError("not a trajectory container (missing footer magic)")
    length = int(np.frombuffer(buffer, dtype=_U64, count=1, offset=len(buffer) - 12)[0])
    footer = json.loads(buffer[len(buffer) - 12 - length:len(buffer) - 12].decode("utf-8"))
    states, times, nu = [], [], float("nan")
    for offset in footer["offsets"]:
        u, nu, t, _ = decode_snapshot(buffer, offset)
        states.append(u)
        times.append(t)

    def _array(key):
        values = footer.get(key)
        return None if values is None else np.array(values, dtype=np.float64)

    traj = Trajectory(
        times=np.array(times, dtype=np.float64),
        states=tuple(states),
        interval=tuple(footer["interval"]),
        provenance=footer.get("provenance") or {},
        cum_dissipation=_array("cum_dissipation"),
        cum_work=_array("cum_work"),
    )
    return traj, nu


def write_trajectory(path: str, traj: Trajectory, nu: float) -> None:
    atomic_write_bytes(path, encode_trajectory(traj, nu))
    logger.info(f"Wrote trajectory with {len(traj)} samples to {path}")


def read_trajectory(path: str) -> Tuple[Trajectory, float]:
    with open(path, "rb") as f:
        return decode_trajectory(f.read())


def encode_measure(measure: EmpiricalMeasure, nu: float = float("nan")) -> bytes:
    header = {
        "count": len(measure.weights),
        "provenance": measure.provenance,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MEASURE_MAGIC, np.array(len(header_bytes), dtype=_U64).tobytes(), header_bytes]
    chunks.extend(encode_snapshot(u, nu, 0.0) for u in measure.states)
    chunks.append(np.ascontiguousarray(measure.weights, dtype="<f8").tobytes())
    return b"".join(chunks)


def decode_measure(buffer: bytes) -> Tuple[EmpiricalMeasure, float]:
    if buffer[:4] != MEASURE_MAGIC:
        raise ValueError("not a measure file (bad magic)")
    length = int(np.frombuffer(buffer, dtype=_U64, count=1, offset=4)[0])
    header = json.loads(buffer[12:12 + length].decode("utf-8"))
    offset = 12 + length
    states, nu = [], float("nan")
    for _ in range(header["count"]):
        u, nu, _, offset = decode_snapshot(buffer, offset)
        states.append(u)
    weights = np.frombuffer(buffer, dtype="<f8", count=header["count"], offset=offset).astype(np.float64)
    measure = EmpiricalMeasure(weights=weights, states=tuple(states), provenance=header.get("provenance") or {})
    return measure, nu


def write_measure(path: str, measure: EmpiricalMeasure, nu: float = float("nan")) -> None:
    atomic_write_bytes(path, encode_measure(measure, nu))
    logger.info(f"Wrote measure with {len(measure.weights)} atoms to {path}")


def read_measure(path: str) -> Tuple[EmpiricalMeasure, float]:
    with open(path, "rb") as f:
        return decode_measure(f.read())
