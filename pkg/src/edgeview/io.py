"""Binary dump of a trial's views and frames, plus small matrix readers.

Layout (little-endian)::

    b"EDGV"  u32 version  u32 L  u32 N  u32 Ks  u32 Kc  u32 preamble_len
    f64 sigma2  u32 rows[L]  u32 edge_ids[Kc]
    f64 view data, each view row-major (rows[l] x N)
    f64 X row-major (N x Ks)
"""

import struct
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import InvalidInputError

MAGIC = b"EDGV"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIII d")


@dataclass
class ViewDump:
    views: List[np.ndarray]
    X: np.ndarray
    sigma2: float
    preamble_len: int
    edge_ids: np.ndarray

    def edge_preambles(self):
        P = self.preamble_len
        return {int(k): self.X[:P, int(k)].copy() for k in self.edge_ids}


def dump_views(path, views, frames, edge_ids):
    edge_ids = np.asarray(edge_ids, dtype="<u4")
    N = views.N
    rows = np.array([v.shape[0] for v in views.views], dtype="<u4")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, views.L, N, frames.X.shape[1],
                              edge_ids.size, frames.preamble_len, float(views.sigma2)))
        fh.write(rows.tobytes())
        fh.write(edge_ids.tobytes())
        for v in views.views:
            fh.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(frames.X, dtype="<f8").tobytes())


def load_views(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size or data[:4] != MAGIC:
        raise InvalidInputError(f"{path} is not an EDGV dump")
    magic, version, L, N, Ks, Kc, P, sigma2 = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise InvalidInputError(f"unsupported dump version {version}")
    off = _HEADER.size
    rows = np.frombuffer(data, "<u4", L, off).astype(int)
    off += 4 * L
    edge_ids = np.frombuffer(data, "<u4", Kc, off).astype(int)
    off += 4 * Kc
    expected = off + 8 * (int(rows.sum()) * N + N * Ks)
    if len(data) != expected:
        raise InvalidInputError(f"dump size {len(data)} does not match header ({expected})")
    views = []
    for m in rows:
        views.append(np.frombuffer(data, "<f8", m * N, off).reshape(m, N).copy())
        off += 8 * m * N
    X = np.frombuffer(data, "<f8", N * Ks, off).reshape(N, Ks).copy()
    return ViewDump(views, X, sigma2, P, edge_ids)


def read_matrix(path):
    """Load a real matrix from ``.npy`` or comma-separated text."""
    path = str(path)
    if path.endswith(".npy"):
        M = np.load(path)
    else:
        M = np.loadtxt(path, delimiter=",", ndmin=2)
    if M.ndim != 2:
        raise InvalidInputError("expected a 2-D matrix")
    return np.asarray(M, dtype=float)
