"""Non-neural baselines: per-species training means and gradient boosted
regression trees on environmental feature vectors."""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._binio import Reader, Writer
from .errors import DataError, MissingInputError

GBRT_MAGIC = b"SDMG"
GBRT_VERSION = 1
# splits must reduce the node's squared error by more than this
MIN_GAIN = 1e-14


@dataclass
class MeanRateModel:
    means: np.ndarray

    def predict(self, n_rows: int) -> np.ndarray:
        return np.tile(self.means, (n_rows, 1))

    def to_json(self) -> str:
        return json.dumps({"means": self.means.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MeanRateModel":
        return cls(np.array(json.loads(text)["means"], dtype=np.float64))


def fit_mean_model(train_rates) -> MeanRateModel:
    """``train_rates`` is an EncounterTable or a [hotspots x species] array."""
    rates = np.asarray(getattr(train_rates, "rates", train_rates), dtype=np.float64)
    if rates.ndim != 2 or rates.shape[0] == 0:
        raise DataError("mean model needs a non-empty training table")
    return MeanRateModel(rates.mean(axis=0))


@dataclass
class GbrtConfig:
    rounds: int = 100
    max_depth: int = 4
    shrinkage: float = 0.1
    min_samples_leaf: int = 5

    def __post_init__(self):
        if self.rounds < 0 or self.max_depth < 1 or self.shrinkage <= 0 or self.min_samples_leaf < 1:
            raise DataError(f"invalid GBRT config {self}")


@dataclass
class Node:
    """Leaf when ``feature`` is None; otherwise ``x[feature] <= threshold`` goes left."""

    value: float = 0.0
    feature: int | None = None
    threshold: float = 0.0
    left: "Node | None" = None
    right: "Node | None" = None

    def depth(self) -> int:
        if self.feature is None:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


@dataclass
class SpeciesBooster:
    init: float
    trees: list[Node] = field(default_factory=list)


@dataclass
class GbrtEnsemble:
    config: GbrtConfig
    n_features: int
    boosters: list[SpeciesBooster]

    @property
    def n_species(self) -> int:
        return len(self.boosters)


def _tree_predict(node: Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    stack = [(node, np.arange(len(X)))]
    while stack:
        nd, idx = stack.pop()
        if nd.feature is None:
            out[idx] = nd.value
            continue
        go_left = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[go_left]))
        stack.append((nd.right, idx[~go_left]))
    return out


class _TreeBuilder:
    """Exact greedy squared-error trees over features presorted once."""

    def __init__(self, X: np.ndarray, max_depth: int, min_leaf: int):
        self.X = X
        self.order = np.argsort(X, axis=0, kind="stable").T.copy()  # [F, n]
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def best_split(self, idx_mask: np.ndarray, r: np.ndarray):
        n = int(idx_mask.sum())
        if n < 2 * self.min_leaf:
            return None
        F = self.order.shape[0]
        sorted_idx = self.order[idx_mask[self.order]].reshape(F, n)
        xs = np.take_along_axis(self.X.T, sorted_idx, axis=1)
        rs = r[sorted_idx]
        csum = np.cumsum(rs, axis=1)[:, :-1]
        total = csum[0, -1] + rs[0, -1] if n > 1 else rs[0, 0]
        n_left = np.arange(1, n)
        n_right = n - n_left
        gain = csum**2 / n_left + (total - csum) ** 2 / n_right - total**2 / n
        valid = (xs[:, :-1] < xs[:, 1:]) & (n_left >= self.min_leaf) & (n_right >= self.min_leaf)
        gain = np.where(valid, gain, -np.inf)
        # argmax over the flattened [feature, position] grid returns the
        # lowest feature, then the lowest threshold, among equal gains
        flat = int(np.argmax(gain))
        f, pos = divmod(flat, n - 1)
        if not gain[f, pos] > MIN_GAIN:
            return None
        return f, float(xs[f, pos])

    def build(self, r: np.ndarray) -> Node | None:
        root_mask = np.ones(len(r), dtype=bool)
        if self.best_split(root_mask, r) is None:
            return None
        return self._grow(root_mask, r, 0)

    def _grow(self, mask, r, depth) -> Node:
        split = self.best_split(mask, r) if depth < self.max_depth else None
        if split is None:
            return Node(value=float(r[mask].mean()))
        f, thr = split
        left = mask & (self.X[:, f] <= thr)
        right = mask & ~left
        return Node(feature=f, threshold=thr, left=self._grow(left, r, depth + 1),
                    right=self._grow(right, r, depth + 1))


def _fit_species(builder: _TreeBuilder, y: np.ndarray, init: float, config: GbrtConfig, trace=None) -> SpeciesBooster:
    booster = SpeciesBooster(init)
    F = np.full(len(y), init)
    for _ in range(config.rounds):
        tree = builder.build(y - F)
        if tree is None:
            break
        booster.trees.append(tree)
        F = F + config.shrinkage * _tree_predict(tree, builder.X)
        if trace is not None:
            trace.append(float(np.mean((y - F) ** 2)))
    return booster


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("SDM_THREADS", "1")))
    except ValueError:
        return 1


def fit_gbrt(features, targets, config: GbrtConfig | None = None, trace: list | None = None) -> GbrtEnsemble:
    """One squared-error boosted ensemble per species.

    ``features`` is ``[n, n_features]``; ``targets`` an EncounterTable or
    ``[n, n_species]`` array with aligned rows. If ``trace`` is a list, it
    receives one list of per-round training MSEs per species.
    """
    config = config or GbrtConfig()
    X = np.asarray(features, dtype=np.float64)
    Y = np.asarray(getattr(targets, "rates", targets), dtype=np.float64)
    if X.ndim != 2 or Y.ndim != 2 or len(X) != len(Y):
        raise DataError(f"features {X.shape} and targets {Y.shape} are not row-aligned")
    if len(X) < 2 * config.min_samples_leaf:
        raise DataError(f"need at least {2 * config.min_samples_leaf} training rows, got {len(X)}")
    if not np.all(np.isfinite(X)):
        raise DataError("features must be finite")
    builder = _TreeBuilder(X, config.max_depth, config.min_samples_leaf)
    traces = [[] if trace is not None else None for _ in range(Y.shape[1])]
    # same reduction as fit_mean_model, so zero rounds reproduce it exactly
    inits = Y.mean(axis=0)

    def work(s):
        return _fit_species(builder, Y[:, s], float(inits[s]), config, traces[s])

    n_threads = _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            boosters = list(pool.map(work, range(Y.shape[1])))
    else:
        boosters = [work(s) for s in range(Y.shape[1])]
    if trace is not None:
        trace.extend(traces)
    return GbrtEnsemble(config, X.shape[1], boosters)


def predict_gbrt(ensemble: GbrtEnsemble, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != ensemble.n_features:
        raise DataError(f"expected {ensemble.n_features} features per row, got shape {X.shape}")
    out = np.empty((len(X), ensemble.n_species))
    for s, b in enumerate(ensemble.boosters):
        acc = np.zeros(len(X))
        for tree in b.trees:
            acc += _tree_predict(tree, X)
        out[:, s] = b.init + ensemble.config.shrinkage * acc
    return np.clip(out, 0.0, 1.0)


def _write_node(w: Writer, node: Node):
    if node.feature is None:
        w.u8(0)
        w.f64(node.value)
    else:
        w.u8(1)
        w.u32(node.feature)
        w.f64(node.threshold)
        _write_node(w, node.left)
        _write_node(w, node.right)


def _read_node(r: Reader) -> Node:
    kind = r.u8()
    if kind == 0:
        return Node(value=r.f64())
    if kind != 1:
        raise DataError(f"{r.name}: bad tree node tag {kind}")
    f, thr = r.u32(), r.f64()
    left = _read_node(r)
    return Node(feature=f, threshold=thr, left=left, right=_read_node(r))


def save_gbrt(path, ensemble: GbrtEnsemble):
    """SDMG layout: magic, u32 version, config (u32 rounds, u32 max depth,
    f64 shrinkage, u32 min leaf), u32 features, u32 species, then per
    species f64 initial value, u32 tree count and pre-order nodes (u8 tag:
    0 leaf + f64 value, 1 split + u32 feature + f64 threshold)."""
    c = ensemble.config
    with open(path, "wb") as fh:
        w = Writer(fh)
        w.magic(GBRT_MAGIC, GBRT_VERSION)
        w.u32(c.rounds)
        w.u32(c.max_depth)
        w.f64(c.shrinkage)
        w.u32(c.min_samples_leaf)
        w.u32(ensemble.n_features)
        w.u32(ensemble.n_species)
        for b in ensemble.boosters:
            w.f64(b.init)
            w.u32(len(b.trees))
            for t in b.trees:
                _write_node(w, t)


def load_gbrt(path) -> GbrtEnsemble:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"GBRT ensemble not found: {path}")
    with path.open("rb") as fh:
        r = Reader(fh, str(path))
        r.magic(GBRT_MAGIC)
        rounds, depth = r.u32(), r.u32()
        shrink = r.f64()
        config = GbrtConfig(rounds, depth, shrink, r.u32())
        n_features, n_species = r.u32(), r.u32()
        boosters = []
        for _ in range(n_species):
            b = SpeciesBooster(r.f64())
            b.trees = [_read_node(r) for _ in range(r.u32())]
            boosters.append(b)
        r.expect_eof()
    return GbrtEnsemble(config, n_features, boosters)
