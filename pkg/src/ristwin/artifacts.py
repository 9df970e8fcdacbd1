"""Deterministic artifact IO: atomic writes, hashing, manifests, run locks.

Every file the pipeline persists goes through this module so that reruns
with identical inputs produce byte-identical outputs.  Nothing here may
embed wall-clock time, hostnames, or absolute paths.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC_DATASET = b"RWDS0001"
MAGIC_MODEL = b"RWMD0001"
MAGIC_CHANNEL = b"RWCH0001"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via temp file + rename so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, obj) -> None:
    # sort_keys + fixed separators: identical dicts serialize identically
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path: str | Path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def pack_json_block(obj) -> bytes:
    """Canonical JSON block for binary headers: u64-LE length + UTF-8 payload."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return struct.pack("<Q", len(payload)) + payload


def unpack_json_block(buf: bytes, offset: int):
    (n,) = struct.unpack_from("<Q", buf, offset)
    start = offset + 8
    obj = json.loads(buf[start : start + n].decode("utf-8"))
    return obj, start + n


def array_to_bytes(a: np.ndarray) -> bytes:
    """Little-endian C-order raw dump.  Caller records shape/dtype elsewhere."""
    a = np.ascontiguousarray(a)
    if a.dtype.byteorder == ">":
        a = a.astype(a.dtype.newbyteorder("<"))
    return a.tobytes(order="C")


def array_from_bytes(buf: bytes, offset: int, dtype, shape) -> tuple[np.ndarray, int]:
    dt = np.dtype(dtype).newbyteorder("<")
    count = int(np.prod(shape, dtype=np.int64)) if len(shape) else 1
    a = np.frombuffer(buf, dtype=dt, count=count, offset=offset)
    return a.reshape(shape).astype(dt.newbyteorder("=")), offset + a.nbytes


def write_manifest(out_dir: str | Path, entries: dict[str, str], name: str = "manifest.json") -> Path:
    """entries: relative filename -> sha256 hex digest."""
    out_dir = Path(out_dir)
    path = out_dir / name
    write_json(path, {"files": dict(sorted(entries.items()))})
    return path


def manifest_for_dir(out_dir: str | Path, patterns: tuple[str, ...] = ("*.bin", "*.json", "*.npz")) -> dict[str, str]:
    out_dir = Path(out_dir)
    entries: dict[str, str] = {}
    for pat in patterns:
        for p in sorted(out_dir.glob(pat)):
            if p.name == "manifest.json" or p.name.endswith(".tmp"):
                continue
            entries[p.name] = sha256_file(p)
    return entries


class RunLock:
    """Advisory single-writer lock on an output directory.

    A stale lock (process gone) is reclaimed; a live one raises.
    """

    def __init__(self, out_dir: str | Path):
        self.path = Path(out_dir) / ".lock"
        self._held = False

    def __enter__(self) -> "RunLock":
        self.path.parent.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            pid = self._read_pid()
            if pid is not None and _pid_alive(pid):
                raise RuntimeError(
                    f"output directory is locked by running process {pid}: {self.path}"
                ) from None
            os.unlink(self.path)
            fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        with os.fdopen(fd, "w") as f:
            f.write(str(os.getpid()))
        self._held = True
        return self

    def __exit__(self, *exc) -> None:
        if self._held:
            try:
                os.unlink(self.path)
            except FileNotFoundError:
                pass
            self._held = False

    def _read_pid(self) -> int | None:
        try:
            return int(self.path.read_text().strip())
        except (OSError, ValueError):
            return None


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True
