"""Named parameter store with gradient accumulators and binary serialization.

Container byte layout (documented so other implementations can read it;
all integers little-endian):

    magic    : 4 bytes, b"IMAP"
    version  : u32 (currently 1)
    records, repeated until end of file:
        name_len : u32
        name     : name_len bytes of UTF-8
        rank     : u32
        extents  : rank * u64
        data     : prod(extents) * f64 (little-endian IEEE 754)

Parameter order inside the file is the store's insertion order, which is
stable and reproduced on load.
"""

from __future__ import annotations

import struct

import numpy as np

from .tensor import Tensor, Tape, attach

MAGIC = b"IMAP"
FORMAT_VERSION = 1


class ParamStoreError(Exception):
    pass


class ParamStore:
    """Ordered mapping name -> leaf Tensor (requires_grad=True)."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array) -> Tensor:
        if name in self._params:
            raise ParamStoreError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(array, dtype=np.float64), requires_grad=True, op=f"param:{name}")
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self):
        return list(self._params.keys())

    def items(self):
        return self._params.items()

    def num_values(self) -> int:
        return sum(t.size for t in self._params.values())

    def attach_all(self, tape: Tape) -> dict[str, Tensor]:
        """Tape-tracked aliases for every parameter (one attach node each)."""
        return {name: attach(t, tape) for name, t in self._params.items()}

    def zero_grad(self):
        for t in self._params.values():
            if t.grad is not None:
                t.grad[...] = 0.0

    def grad_norm(self) -> float:
        total = 0.0
        for t in self._params.values():
            if t.grad is not None:
                total += float(np.sum(t.grad * t.grad))
        return float(np.sqrt(total))

    def clip_grad_norm(self, max_norm: float) -> float:
        """Scale all grads so the global L2 norm is at most max_norm."""
        norm = self.grad_norm()
        if norm > max_norm and norm > 0.0:
            scale = max_norm / norm
            for t in self._params.values():
                if t.grad is not None:
                    t.grad *= scale
        return norm

    def scale_grads(self, factor: float):
        for t in self._params.values():
            if t.grad is not None:
                t.grad *= factor

    def add_grads_from(self, other: "ParamStore"):
        """Merge gradients from a store with identical structure (summation)."""
        for name, t in self._params.items():
            og = other._params[name].grad
            if og is None:
                continue
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            t.grad += og

    def state_copy(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state(self, state: dict[str, np.ndarray]):
        for name, t in self._params.items():
            src = state[name]
            if src.shape != t.data.shape:
                raise ParamStoreError(f"state shape mismatch for {name!r}")
            t.data[...] = src

    # -- binary container ---------------------------------------------------

    def to_bytes(self) -> bytes:
        chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
        for name, t in self._params.items():
            nb = name.encode("utf-8")
            chunks.append(struct.pack("<I", len(nb)))
            chunks.append(nb)
            chunks.append(struct.pack("<I", t.data.ndim))
            for extent in t.data.shape:
                chunks.append(struct.pack("<Q", extent))
            chunks.append(np.ascontiguousarray(t.data, dtype="<f8").tobytes())
        return b"".join(chunks)

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ParamStore":
        if len(blob) < 8 or blob[:4] != MAGIC:
            raise ParamStoreError("bad magic; not a parameter container")
        (version,) = struct.unpack_from("<I", blob, 4)
        if version != FORMAT_VERSION:
            raise ParamStoreError(f"unsupported container version {version}")
        store = cls()
        off = 8
        n = len(blob)
        while off < n:
            if off + 4 > n:
                raise ParamStoreError("truncated record header")
            (name_len,) = struct.unpack_from("<I", blob, off)
            off += 4
            if off + name_len + 4 > n:
                raise ParamStoreError("truncated parameter name")
            name = blob[off:off + name_len].decode("utf-8")
            off += name_len
            (rank,) = struct.unpack_from("<I", blob, off)
            off += 4
            if off + 8 * rank > n:
                raise ParamStoreError(f"truncated extents for {name!r}")
            extents = struct.unpack_from(f"<{rank}Q" if rank else "<0Q", blob, off)
            off += 8 * rank
            count = int(np.prod(extents)) if rank else 1
            nbytes = 8 * count
            if off + nbytes > n:
                raise ParamStoreError(f"truncated data for {name!r}")
            data = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(extents)
            off += nbytes
            store.add(name, np.array(data, dtype=np.float64))
        return store

    @classmethod
    def load(cls, path) -> "ParamStore":
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())
