"""Weight sets and the ``SVW1`` weight container.

Container layout (all integers little-endian)::

    0        4 bytes   magic b"SVW1"
    4        uint32    header_len
    8        header    UTF-8 JSON, header_len bytes
    ...      zero padding up to a multiple of 64
    P        payload   float32 LE tensors, each starting on a 64-byte boundary

The header holds ``format_version``, ``model_config``, ``alignment``,
``payload_length``, ``payload_crc32`` (zlib/IEEE CRC-32 of the whole payload
including padding) and ``tensors``: a list of ``{name, shape, dtype, offset,
length}`` with offsets relative to ``P``. Serialization is deterministic, so
equal inputs give byte-identical files.
"""

import json
import struct
import zlib
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from . import sequence, vlad
from .config import FORMAT_VERSION, ModelConfig
from .errors import (BadMagic, ConfigError, CrcMismatch, IoError, MissingTensor,
                     ShapeError, UnsupportedFormat, VersionUnsupported)

MAGIC = b"SVW1"
ALIGN = 64


def tensor_shapes(cfg):
    """Every tensor of the model, in schedule order."""
    shapes = dict(sequence.tensor_shapes(cfg.sequence))
    shapes.update(vlad.tensor_shapes(cfg.vlad))
    return shapes


class WeightSet(Mapping):
    """Read-only mapping of tensor name to float32 array."""

    def __init__(self, tensors):
        self._tensors = {}
        for name, value in tensors.items():
            arr = np.array(value, dtype="<f4", copy=True)
            arr.setflags(write=False)
            self._tensors[name] = arr

    def __getitem__(self, name):
        return self._tensors[name]

    def __iter__(self):
        return iter(self._tensors)

    def __len__(self):
        return len(self._tensors)

    def scalar_count(self):
        return sum(a.size for a in self._tensors.values())

    def __eq__(self, other):
        if not isinstance(other, Mapping) or set(self) != set(other):
            return False
        return all(self[n].tobytes() == np.asarray(other[n], dtype="<f4").tobytes()
                   and self[n].shape == np.shape(other[n]) for n in self)

    __hash__ = None


def random_init(cfg, seed=0):
    """Deterministic random weights.

    Convolution and linear weights (and their biases) are uniform in
    ``+-sqrt(1/fan_in)``; batch norm is the identity (gamma=1, beta=0,
    mean=0, var=1); PReLU slopes are 0.25; centroids are uniform in [-1, 1].
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    shapes = tensor_shapes(cfg)
    out = {}
    for name, shape in shapes.items():
        leaf = name.rsplit(".", 1)[-1]
        if name == "vlad.centroids":
            bound = 1.0
        elif leaf == "weight" or name in ("vlad.assign_weights", "vlad.projection"):
            bound = np.sqrt(1.0 / shape[1])
        elif leaf == "bias":
            bound = np.sqrt(1.0 / shapes[name[:-len("bias")] + "weight"][1])
        elif name in ("vlad.assign_bias", "vlad.projection_bias"):
            bound = np.sqrt(1.0 / cfg.vlad.in_channels)
        else:
            bound = None
        if bound is not None:
            value = rng.uniform(-bound, bound, size=shape)
        elif leaf in ("gamma", "running_var"):
            value = np.ones(shape)
        elif leaf in ("beta", "running_mean"):
            value = np.zeros(shape)
        elif leaf == "slope":
            value = np.full(shape, 0.25)
        else:
            raise AssertionError(f"no init rule for {name}")
        out[name] = value.astype(np.float32)
    return WeightSet(out)


def _check_complete(cfg, tensors):
    expected = tensor_shapes(cfg)
    for name, shape in expected.items():
        if name not in tensors:
            raise MissingTensor(name)
        if tuple(np.shape(tensors[name])) != tuple(shape):
            raise ShapeError(name, tuple(shape), tuple(np.shape(tensors[name])))
    extra = sorted(set(tensors) - set(expected))
    if extra:
        raise UnsupportedFormat(f"unexpected tensor {extra[0]!r} for this config")
    return expected


def _align(n):
    return -(-n // ALIGN) * ALIGN


def save_weights(cfg, tensors):
    """Serialize config and tensors to container bytes."""
    cfg.validate()
    expected = _check_complete(cfg, tensors)
    table, chunks, offset = [], [], 0
    for name in expected:
        data = np.ascontiguousarray(tensors[name], dtype="<f4").tobytes()
        start = _align(offset)
        if start > offset:
            chunks.append(b"\0" * (start - offset))
        chunks.append(data)
        table.append({"name": name, "shape": list(expected[name]), "dtype": "f32",
                      "offset": start, "length": len(data)})
        offset = start + len(data)
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "model_config": cfg.to_dict(),
        "alignment": ALIGN,
        "payload_length": len(payload),
        "payload_crc32": zlib.crc32(payload),
        "tensors": table,
    }
    hbytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    prefix = MAGIC + struct.pack("<I", len(hbytes)) + hbytes
    return prefix + b"\0" * (_align(len(prefix)) - len(prefix)) + payload


def load_weights(blob):
    """Parse container bytes into ``(ModelConfig, WeightSet)``."""
    blob = bytes(blob)
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise BadMagic(f"not an SVW1 container (magic {blob[:4]!r})")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if 8 + hlen > len(blob):
        raise UnsupportedFormat("header extends past end of file")
    try:
        header = json.loads(blob[8:8 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise UnsupportedFormat(f"unreadable header: {exc}") from None
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionUnsupported(f"container version {version}, supported {FORMAT_VERSION}")
    start = _align(8 + hlen)
    payload = blob[start:]
    if len(payload) != header.get("payload_length"):
        raise UnsupportedFormat(
            f"payload is {len(payload)} bytes, header says {header.get('payload_length')}")
    if zlib.crc32(payload) != header.get("payload_crc32"):
        raise CrcMismatch("payload checksum does not match header")
    try:
        cfg = ModelConfig.from_dict(header["model_config"])
    except (KeyError, TypeError) as exc:
        raise UnsupportedFormat(f"bad model_config: {exc}") from None

    tensors, spans = {}, []
    for entry in header.get("tensors", []):
        name = entry["name"]
        if name in tensors:
            raise UnsupportedFormat(f"tensor {name!r} appears twice")
        if entry.get("dtype") != "f32":
            raise UnsupportedFormat(f"tensor {name!r} has dtype {entry.get('dtype')!r}")
        shape = tuple(entry["shape"])
        off, length = entry["offset"], entry["length"]
        if length != 4 * int(np.prod(shape)) or off < 0 or off + length > len(payload):
            raise UnsupportedFormat(f"tensor {name!r} has an invalid extent")
        spans.append((off, off + length, name))
        tensors[name] = np.frombuffer(payload, dtype="<f4", count=length // 4,
                                      offset=off).reshape(shape)
    spans.sort()
    for (_, end, a), (begin, _, b) in zip(spans, spans[1:]):
        if begin < end:
            raise UnsupportedFormat(f"tensors {a!r} and {b!r} overlap")
    _check_complete(cfg, tensors)
    return cfg, WeightSet(tensors)


def save_model(path, cfg, tensors):
    Path(path).write_bytes(save_weights(cfg, tensors))


def load_model(path, expected_config=None):
    """Load a container from disk, optionally requiring a matching config."""
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError:
        raise IoError(f"no such model file: {path}") from None
    except OSError as exc:
        raise IoError(f"cannot read model {path}: {exc}") from None
    cfg, weights = load_weights(blob)
    if expected_config is not None and expected_config != cfg:
        raise ConfigError("model_config", "does not match the config embedded in the model file")
    return cfg, weights
