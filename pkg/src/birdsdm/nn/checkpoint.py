"""SDMC checkpoint files.

Layout (little-endian): magic ``SDMC``, u32 version, descriptor JSON as
u32-length UTF-8, u32 tensor count, then per tensor: name (u32-length
UTF-8), u32 ndim, u32 extents, float64 data.
"""
from pathlib import Path

from .._binio import Reader, Writer
from ..errors import MissingInputError
from .model import CnnDescriptor, Model

MAGIC = b"SDMC"
VERSION = 1


def save_checkpoint(path, model: Model):
    with open(path, "wb") as fh:
        w = Writer(fh)
        w.magic(MAGIC, VERSION)
        w.text(model.descriptor.to_json())
        w.u32(len(model.params))
        for name, t in model.params.items():
            w.text(name)
            w.u32(t.data.ndim)
            for n in t.data.shape:
                w.u32(n)
            w.array(t.data, "f8")


def load_checkpoint(path) -> Model:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"checkpoint not found: {path}")
    with path.open("rb") as fh:
        r = Reader(fh, str(path))
        r.magic(MAGIC)
        desc = CnnDescriptor.from_json(r.text())
        params = {}
        for _ in range(r.u32()):
            name = r.text()
            shape = tuple(r.u32() for _ in range(r.u32()))
            count = 1
            for n in shape:
                count *= n
            params[name] = r.array(count, "f8").reshape(shape)
        r.expect_eof()
    return Model(desc, params)
