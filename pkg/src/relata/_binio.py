"""Little-endian binary record helpers shared by the model file formats."""

import json
import struct

import numpy as np

from relata.errors import FormatError


class Writer:
    def __init__(self, fh):
        self.fh = fh

    def raw(self, b: bytes):
        self.fh.write(b)

    def u32(self, v: int):
        self.fh.write(struct.pack("<I", v))

    def text(self, s: str):
        b = s.encode("utf-8")
        self.u32(len(b))
        self.fh.write(b)

    def meta(self, obj):
        self.text(json.dumps(obj, sort_keys=True))

    def floats(self, arr):
        self.fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())

    def array(self, arr):
        arr = np.asarray(arr)
        self.u32(arr.ndim)
        for d in arr.shape:
            self.u32(d)
        self.floats(arr)


class Reader:
    def __init__(self, data: bytes, source: str = "<bytes>"):
        self.data = memoryview(data)
        self.pos = 0
        self.source = source

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"{self.source}: truncated file at byte {self.pos}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def magic(self, expected: bytes, version: int):
        got = self.take(len(expected))
        if got != expected:
            raise FormatError(f"{self.source}: bad magic {got!r}, expected {expected!r}")
        v = self.u32()
        if v != version:
            raise FormatError(f"{self.source}: unsupported format version {v} (expected {version})")

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def text(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError(f"{self.source}: invalid UTF-8 string") from exc

    def meta(self):
        try:
            return json.loads(self.text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{self.source}: corrupt metadata block") from exc

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(4 * count), dtype="<f4").astype(np.float32)

    def array(self) -> np.ndarray:
        ndim = self.u32()
        shape = tuple(self.u32() for _ in range(ndim))
        return self.floats(int(np.prod(shape, dtype=np.int64))).reshape(shape)

    def finish(self):
        if self.pos != len(self.data):
            raise FormatError(f"{self.source}: {len(self.data) - self.pos} trailing bytes")
