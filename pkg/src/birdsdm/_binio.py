"""Little-endian helpers for the SDM* binary formats."""
import struct

import numpy as np

from .errors import DataError


class Writer:
    def __init__(self, fh):
        self.fh = fh

    def magic(self, tag: bytes, version: int):
        self.fh.write(tag)
        self.u32(version)

    def u8(self, v):
        self.fh.write(struct.pack("<B", v))

    def u32(self, v):
        self.fh.write(struct.pack("<I", v))

    def f64(self, v):
        self.fh.write(struct.pack("<d", v))

    def text(self, s: str):
        raw = s.encode("utf-8")
        self.u32(len(raw))
        self.fh.write(raw)

    def array(self, arr, dtype):
        self.fh.write(np.ascontiguousarray(arr, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())


class Reader:
    def __init__(self, fh, name="<stream>"):
        self.fh = fh
        self.name = name

    def _take(self, n):
        raw = self.fh.read(n)
        if len(raw) != n:
            raise DataError(f"{self.name}: truncated file")
        return raw

    def magic(self, tag: bytes, supported=(1,)):
        got = self._take(len(tag))
        if got != tag:
            raise DataError(f"{self.name}: bad magic {got!r}, expected {tag!r}")
        version = self.u32()
        if version not in supported:
            raise DataError(f"{self.name}: unsupported version {version}")
        return version

    def u8(self):
        return struct.unpack("<B", self._take(1))[0]

    def u32(self):
        return struct.unpack("<I", self._take(4))[0]

    def f64(self):
        return struct.unpack("<d", self._take(8))[0]

    def text(self):
        return self._take(self.u32()).decode("utf-8")

    def array(self, count, dtype):
        dt = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self._take(count * dt.itemsize), dtype=dt).astype(np.dtype(dtype).newbyteorder("="))

    def expect_eof(self):
        if self.fh.read(1):
            raise DataError(f"{self.name}: trailing bytes")
