"""Update compression codecs: affine int8 quantization, Top-k, Rand-k, dense.

Binary frame layout (little-endian):
    tag u8 (0 dense, 1 quantized, 2 topk, 3 randk) | d u32 |
    quantized: S f32, Z i32 | sparse: m u32, seed u64 |
    payload (dense: d f32; quantized: d i8; sparse: m u32 then m f32)
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadFraction,
    CorruptPayload,
    EmptyInput,
    MalformedFrame,
    NonFiniteInput,
)

TAG_DENSE, TAG_QUANTIZED, TAG_TOPK, TAG_RANDK = 0, 1, 2, 3

Q_MIN, Q_MAX = -128, 127


@dataclass(frozen=True)
class Dense:
    values: np.ndarray  # float32, length d

    @property
    def d(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Quantized:
    scale: float
    zero_point: int
    q: np.ndarray  # int8, length d
    d: int


@dataclass(frozen=True)
class Sparse:
    indices: np.ndarray  # uint32, strictly ascending
    values: np.ndarray   # float32, same length as indices
    d: int
    kind: str            # "topk" | "randk"
    seed: int = 0        # generator seed for randk, 0 for topk


CompressedPayload = Dense | Quantized | Sparse


def _check_input(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 1 or len(x) == 0:
        raise EmptyInput("input must be a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise NonFiniteInput("input contains non-finite values")
    return x


def quantize(x: np.ndarray) -> Quantized:
    """Affine int8 quantization with a per-vector [min, max] range."""
    x = _check_input(x)
    alpha = float(x.min())
    beta = float(x.max())
    if alpha == beta:
        # degenerate range: scale 1, zero point reproducing the constant
        scale = 1.0
        zero_point = int(round(-alpha))
    else:
        scale = (beta - alpha) / (Q_MAX - Q_MIN)
        zero_point = int(round(Q_MIN - alpha / scale))
    q = np.clip(np.round(x.astype(np.float64) / scale + zero_point), Q_MIN, Q_MAX)
    return Quantized(scale=scale, zero_point=zero_point, q=q.astype(np.int8), d=len(x))


def dequantize(p: Quantized) -> np.ndarray:
    return (np.float32(p.scale) * (p.q.astype(np.float32) - np.float32(p.zero_point))).astype(
        np.float32
    )


def _keep_count(k: float, d: int) -> int:
    if not 0 < k <= 1:
        raise BadFraction(f"k must be in (0, 1], got {k}")
    return max(1, math.ceil(k * d))


def top_k(x: np.ndarray, k: float) -> Sparse:
    """Retain the max(1, ceil(k*d)) largest-magnitude entries, ties to lower index."""
    x = _check_input(x)
    m = _keep_count(k, len(x))
    order = np.argsort(-np.abs(x), kind="stable")[:m]
    idx = np.sort(order).astype(np.uint32)
    return Sparse(indices=idx, values=x[idx], d=len(x), kind="topk")


def rand_k(x: np.ndarray, k: float, seed: int) -> Sparse:
    """Retain a seeded uniform sample of max(1, ceil(k*d)) entries."""
    x = _check_input(x)
    m = _keep_count(k, len(x))
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(x), size=m, replace=False)).astype(np.uint32)
    return Sparse(indices=idx, values=x[idx], d=len(x), kind="randk", seed=seed)


def compress(x: np.ndarray, scheme: str, k: float | None = None, seed: int = 0) -> CompressedPayload:
    """Dispatch on the task's compress setting."""
    if scheme == "No":
        return Dense(np.asarray(x, dtype=np.float32))
    if scheme == "quantize":
        return quantize(x)
    if scheme == "topk":
        return top_k(x, k if k is not None else 0.1)
    if scheme == "randk":
        return rand_k(x, k if k is not None else 0.1, seed)
    raise ValueError(f"unknown compression scheme {scheme!r}")


def decompress(p: CompressedPayload) -> np.ndarray:
    if isinstance(p, Dense):
        return np.asarray(p.values, dtype=np.float32)
    if isinstance(p, Quantized):
        if len(p.q) != p.d:
            raise CorruptPayload("quantized payload length mismatch")
        return dequantize(p)
    if isinstance(p, Sparse):
        if len(p.indices) != len(p.values):
            raise CorruptPayload("sparse index/value length mismatch")
        if len(p.indices) > p.d:
            raise CorruptPayload("more entries than declared dimension")
        if len(p.indices) and int(p.indices.max()) >= p.d:
            raise CorruptPayload("sparse index out of range")
        out = np.zeros(p.d, dtype=np.float32)
        out[p.indices.astype(np.int64)] = p.values
        return out
    raise CorruptPayload(f"unknown payload type {type(p).__name__}")


def encode_frame(p: CompressedPayload) -> bytes:
    """Serialize a payload into the binary weight-frame layout."""
    if isinstance(p, Dense):
        v = np.asarray(p.values, dtype="<f4")
        return struct.pack("<BI", TAG_DENSE, len(v)) + v.tobytes()
    if isinstance(p, Quantized):
        return (
            struct.pack("<BIfi", TAG_QUANTIZED, p.d, p.scale, p.zero_point)
            + p.q.astype("<i1").tobytes()
        )
    if isinstance(p, Sparse):
        tag = TAG_TOPK if p.kind == "topk" else TAG_RANDK
        return (
            struct.pack("<BIIQ", tag, p.d, len(p.indices), p.seed)
            + p.indices.astype("<u4").tobytes()
            + p.values.astype("<f4").tobytes()
        )
    raise ValueError(f"cannot encode {type(p).__name__}")


def decode_frame(buf: bytes) -> CompressedPayload:
    """Parse a binary weight frame; any malformation raises a typed error."""
    if len(buf) < 5:
        raise MalformedFrame("frame shorter than common header")
    tag, d = struct.unpack_from("<BI", buf, 0)
    off = 5
    if tag == TAG_DENSE:
        if len(buf) != off + 4 * d:
            raise MalformedFrame("dense frame length mismatch")
        return Dense(np.frombuffer(buf, dtype="<f4", count=d, offset=off).copy())
    if tag == TAG_QUANTIZED:
        if len(buf) < off + 8:
            raise MalformedFrame("quantized frame missing header")
        scale, zero_point = struct.unpack_from("<fi", buf, off)
        off += 8
        if len(buf) != off + d:
            raise MalformedFrame("quantized frame length mismatch")
        if not math.isfinite(scale) or scale <= 0:
            raise MalformedFrame("non-positive or non-finite scale")
        q = np.frombuffer(buf, dtype="<i1", count=d, offset=off).copy()
        return Quantized(scale=float(scale), zero_point=int(zero_point), q=q, d=d)
    if tag in (TAG_TOPK, TAG_RANDK):
        if len(buf) < off + 12:
            raise MalformedFrame("sparse frame missing header")
        m, seed = struct.unpack_from("<IQ", buf, off)
        off += 12
        if m > d:
            raise MalformedFrame("sparse frame declares more entries than dimension")
        if len(buf) != off + 8 * m:
            raise MalformedFrame("sparse frame length mismatch")
        idx = np.frombuffer(buf, dtype="<u4", count=m, offset=off).copy()
        vals = np.frombuffer(buf, dtype="<f4", count=m, offset=off + 4 * m).copy()
        if m and (int(idx.max()) >= d or np.any(np.diff(idx.astype(np.int64)) <= 0)):
            raise MalformedFrame("sparse indices not strictly ascending in range")
        kind = "topk" if tag == TAG_TOPK else "randk"
        return Sparse(indices=idx, values=vals, d=d, kind=kind, seed=int(seed))
    raise MalformedFrame(f"unknown frame tag {tag}")
