"""CNN encounter-rate predictor with an optional location encoder."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import DataError
from .tensor import Tensor, concat, conv2d, dense, dropout, global_average_pool, maxpool2d, relu, _sigmoid


@dataclass(frozen=True)
class CnnDescriptor:
    in_channels: int
    n_species: int
    conv_channels: tuple[int, ...] = (16, 32)
    kernel_size: int = 3
    use_location: bool = False
    loc_width: int = 256
    loc_blocks: int = 4
    dropout: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        if self.in_channels < 1 or self.n_species < 1 or not self.conv_channels:
            raise DataError(f"invalid architecture: {self}")
        if not 0 <= self.dropout < 1:
            raise DataError("dropout must lie in [0, 1)")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CnnDescriptor":
        return cls(**json.loads(text))

    def param_shapes(self) -> dict[str, tuple[int, ...]]:
        k = self.kernel_size
        shapes: dict[str, tuple[int, ...]] = {}
        c_in = self.in_channels
        for i, c_out in enumerate(self.conv_channels):
            shapes[f"conv{i}.weight"] = (c_out, c_in, k, k)
            shapes[f"conv{i}.bias"] = (c_out,)
            c_in = c_out
        head_in = c_in
        if self.use_location:
            w = self.loc_width
            shapes["loc.input.weight"] = (4, w)
            shapes["loc.input.bias"] = (w,)
            for b in range(self.loc_blocks):
                for fc in ("fc1", "fc2"):
                    shapes[f"loc.block{b}.{fc}.weight"] = (w, w)
                    shapes[f"loc.block{b}.{fc}.bias"] = (w,)
            head_in += w
        shapes["head.weight"] = (head_in, self.n_species)
        shapes["head.bias"] = (self.n_species,)
        return shapes


def count_parameters(desc: CnnDescriptor) -> int:
    return int(sum(np.prod(s) for s in desc.param_shapes().values()))


def rescale_location(lat, lon) -> np.ndarray:
    """Map degrees to [-1, 1]: ``(lat / 90, lon / 180)``."""
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 180):
        raise DataError("coordinates out of range")
    return np.stack([lat / 90.0, lon / 180.0], axis=-1)


def coordinate_embedding(loc) -> np.ndarray:
    """``[cos(pi lat'), sin(pi lat'), cos(pi lon'), sin(pi lon')]`` for rescaled coordinates."""
    loc = np.asarray(loc, dtype=np.float64)
    lat, lon = loc[..., 0], loc[..., 1]
    return np.stack([np.cos(np.pi * lat), np.sin(np.pi * lat), np.cos(np.pi * lon), np.sin(np.pi * lon)], axis=-1)


class Model:
    """Parameters (named leaf tensors) plus the forward pass they define."""

    def __init__(self, descriptor: CnnDescriptor, params: dict[str, np.ndarray]):
        expected = descriptor.param_shapes()
        if list(params) != list(expected):
            raise DataError(f"parameter names {list(params)} do not match architecture {list(expected)}")
        for name, shape in expected.items():
            if tuple(np.shape(params[name])) != shape:
                raise DataError(f"parameter {name} has shape {np.shape(params[name])}, expected {shape}")
        self.descriptor = descriptor
        self.params = {n: Tensor(np.array(v, dtype=np.float64), requires_grad=True) for n, v in params.items()}

    def __getitem__(self, name) -> Tensor:
        return self.params[name]

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def state(self) -> dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self.params.items()}

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def location_features(self, loc, training=False, rng=None) -> Tensor:
        """Location encoder: dense(4 -> w) then residual blocks of
        dense, relu, dropout, dense, skip-add, relu."""
        p = self.params
        d = self.descriptor
        h = dense(Tensor(coordinate_embedding(loc)), p["loc.input.weight"], p["loc.input.bias"])
        for b in range(d.loc_blocks):
            y = relu(dense(h, p[f"loc.block{b}.fc1.weight"], p[f"loc.block{b}.fc1.bias"]))
            y = dropout(y, d.dropout, rng, training)
            y = dense(y, p[f"loc.block{b}.fc2.weight"], p[f"loc.block{b}.fc2.bias"])
            h = relu(h + y)
        return h

    def image_features(self, x) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(x)
        for i in range(len(self.descriptor.conv_channels)):
            h = maxpool2d(relu(conv2d(h, self.params[f"conv{i}.weight"], self.params[f"conv{i}.bias"])))
        return global_average_pool(h)

    def logits(self, x, loc=None, training=False, rng=None) -> Tensor:
        d = self.descriptor
        if np.ndim(x if not isinstance(x, Tensor) else x.data) != 4:
            raise DataError("model input must be [batch, channels, height, width]")
        channels = (x.data if isinstance(x, Tensor) else x).shape[1]
        if channels != d.in_channels:
            raise DataError(f"model expects {d.in_channels} input channels, got {channels}")
        feats = self.image_features(x)
        if d.use_location:
            if loc is None:
                raise DataError("model uses location but no coordinates were given")
            feats = concat([feats, self.location_features(loc, training, rng)], axis=1)
        return dense(feats, self.params["head.weight"], self.params["head.bias"])

    def predict_proba(self, x, loc=None) -> np.ndarray:
        return _sigmoid(self.logits(x, loc).data)


def build_cnn(descriptor: CnnDescriptor, seed: int = 0) -> Model:
    """He (fan-in) normal initialization for all weights, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in descriptor.param_shapes().items():
        if name.endswith(".bias"):
            params[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
            params[name] = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)
    return Model(descriptor, params)


def init_extra_band_weights(reference_kernel, n_extra: int, seed: int = 0) -> np.ndarray:
    """Draw first-layer kernel slices for ``n_extra`` new input bands.

    ``reference_kernel`` is ``[out, bands, k, k]``; new weights are normal
    with the mean and std of all reference weights. Returns
    ``[out, n_extra, k, k]``.
    """
    ref = np.asarray(reference_kernel, dtype=np.float64)
    if ref.size == 0:
        raise DataError("reference kernel is empty")
    shape = (ref.shape[0], n_extra) + ref.shape[2:]
    mean, std = ref.mean(), ref.std()
    if std == 0:
        return np.full(shape, mean)
    return np.random.default_rng(seed).normal(mean, std, size=shape)


def expand_input_channels(model: Model, n_extra: int, seed: int = 0) -> Model:
    """Copy of ``model`` accepting ``n_extra`` more input channels, appended
    after the existing ones."""
    d = model.descriptor
    state = model.state()
    w = state["conv0.weight"]
    state["conv0.weight"] = np.concatenate([w, init_extra_band_weights(w, n_extra, seed)], axis=1)
    new = CnnDescriptor(**{**asdict(d), "in_channels": d.in_channels + n_extra})
    return Model(new, state)
