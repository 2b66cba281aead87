"""End-to-end experiment pipeline: build -> split -> train -> predict ->
mask -> eval, with a manifest that makes every stage re-runnable and
checkable.

Each stage records in ``manifest.json`` a hash of the config values it
depends on, the hashes of its inputs and of its outputs. A stage whose
record still matches is skipped unless forced; an input produced by an
upstream stage must still match the hash that stage recorded.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import logging
import shutil
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from filelock import FileLock, Timeout

from . import baselines, checklists as ck, features as ft, masking, metrics
from .errors import DataError, MissingInputError, SdmError, UsageError
from .nn import (CnnDescriptor, Dataset, TrainConfig, build_cnn, expand_input_channels, load_checkpoint,
                 rescale_location, save_checkpoint, train as train_model, write_train_log)
from .nn import predict as predict_cnn
from .split import SPLITS, assign_splits, cluster_hotspots, read_splits, write_splits

log = logging.getLogger(__name__)

MODELS = ("mean", "gbrt", "cnn")
MASK_MODES = ("none", "hard", "soft")
STAGES = ("build", "split", "train", "predict", "mask", "eval")

TABLE = "table.sdmt"
HISTOGRAM = "species_histogram.json"
SPLITS_CSV = "splits.csv"
STATS = "stats.json"
MEAN_MODEL = "model.mean.json"
GBRT_MODEL = "model.sdmg"
CNN_MODEL = "model.sdmc"
TRAIN_LOG = "train_log.csv"
RAW_PREDICTIONS = "predictions_raw.sdmt"
PREDICTIONS = "predictions.sdmt"
FACTORS = "factors.csv"
REPORT = "report.json"
PER_SPECIES = "per_species.csv"
GEOJSON = "performance.geojson"
MANIFEST = "manifest.json"


@dataclass
class PipelineConfig:
    checklists: Path
    species: Path
    output: Path
    patches: Path | None = None
    rangemaps: Path | None = None
    min_checklists: int = 5
    months: tuple[int, ...] | None = None
    min_dist_km: float = 5.0
    ratios: tuple[float, float, float] = (0.7, 0.2, 0.1)
    use_env: bool = True
    use_landcover: bool = False
    use_location: bool = False
    crop_size: int = 64
    model: str = "cnn"
    conv_channels: tuple[int, ...] = (16, 32)
    loc_width: int = 256
    loc_blocks: int = 4
    dropout: float = 0.5
    init_from: Path | None = None
    mask: str = "none"
    topk_denominator: str = "min"
    eval_split: str = "test"
    seed: int = 0
    train: TrainConfig = field(default_factory=TrainConfig)
    gbrt: baselines.GbrtConfig = field(default_factory=baselines.GbrtConfig)

    def __post_init__(self):
        for name in ("checklists", "species", "output", "patches", "rangemaps", "init_from"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, Path(v))
        if self.model not in MODELS:
            raise UsageError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.mask not in MASK_MODES:
            raise UsageError(f"mask must be one of {MASK_MODES}, got {self.mask!r}")
        if self.mask == "hard" and self.rangemaps is None:
            raise UsageError("mask=hard needs a range map file")
        if self.eval_split not in SPLITS:
            raise UsageError(f"eval_split must be one of {SPLITS}")
        if self.topk_denominator not in metrics.DENOMINATORS:
            raise UsageError(f"topk_denominator must be one of {metrics.DENOMINATORS}")
        if self.model in ("gbrt", "cnn") and self.patches is None:
            raise UsageError(f"model={self.model} needs a patches directory")
        self.ratios = tuple(float(r) for r in self.ratios)
        self.conv_channels = tuple(int(c) for c in self.conv_channels)
        if self.months is not None:
            self.months = tuple(int(m) for m in self.months)
        self.train.seed = self.seed

    def check_inputs(self):
        for name in ("checklists", "species", "patches", "rangemaps", "init_from"):
            p = getattr(self, name)
            if p is not None and not p.exists():
                raise MissingInputError(f"{name} path does not exist: {p}")

    def as_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, Path):
                v = str(v)
            elif f.name in ("train", "gbrt"):
                v = asdict(v)
            elif isinstance(v, tuple):
                v = list(v)
            d[f.name] = v
        return d

    def stage_params(self, stage: str) -> dict:
        d = self.as_dict()
        keys = {
            "build": ["min_checklists", "months"],
            "split": ["min_dist_km", "ratios", "seed"],
            "train": ["model", "use_env", "use_landcover", "use_location", "crop_size", "conv_channels",
                      "loc_width", "loc_blocks", "dropout", "seed"] + (["train"] if self.model == "cnn" else [])
                     + (["gbrt"] if self.model == "gbrt" else []),
            "predict": ["model", "use_env", "use_landcover", "use_location", "crop_size", "eval_split"],
            "mask": ["mask", "min_checklists", "months"],
            "eval": ["topk_denominator"],
        }[stage]
        return {k: d[k] for k in keys}


def _bool(v: str) -> bool:
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {v!r}")


def _floats(v: str):
    return tuple(float(x) for x in v.replace(" ", "").split(",") if x)


def _ints(v: str):
    return tuple(int(x) for x in v.replace(" ", "").split(",") if x)


def load_config(path, **overrides) -> PipelineConfig:
    """Read an INI experiment file; relative paths resolve against its folder.

    Sections: ``[paths]``, ``[data]``, ``[split]``, ``[features]``,
    ``[model]``, ``[train]``, ``[gbrt]``, ``[mask]``, ``[eval]``, ``[run]``.
    Keyword ``overrides`` replace top-level fields after loading.
    """
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"{path}: {exc}") from None
    base = path.parent

    def get(section, key, conv=str, default=None):
        if cp.has_option(section, key):
            raw = cp.get(section, key).strip()
            return conv(raw) if raw != "" else default
        return default

    def p(key):
        v = get("paths", key)
        return None if v is None else (base / v if not Path(v).is_absolute() else Path(v))

    try:
        tc = TrainConfig(**{f.name: get("train", f.name, type(getattr(TrainConfig(), f.name)) if f.name != "augment" else _bool,
                                        getattr(TrainConfig(), f.name))
                            for f in fields(TrainConfig)})
        gc = baselines.GbrtConfig(
            rounds=get("gbrt", "rounds", int, 100), max_depth=get("gbrt", "max_depth", int, 4),
            shrinkage=get("gbrt", "shrinkage", float, 0.1), min_samples_leaf=get("gbrt", "min_samples_leaf", int, 5))
        kwargs = dict(
            checklists=p("checklists"), species=p("species"), output=p("output"), patches=p("patches"),
            rangemaps=p("rangemaps"), init_from=None,
            min_checklists=get("data", "min_checklists", int, 5), months=get("data", "months", _ints),
            min_dist_km=get("split", "min_dist_km", float, 5.0),
            ratios=get("split", "ratios", _floats, (0.7, 0.2, 0.1)),
            use_env=get("features", "use_env", _bool, True),
            use_landcover=get("features", "use_landcover", _bool, False),
            use_location=get("features", "use_location", _bool, False),
            crop_size=get("features", "crop_size", int, 64),
            model=get("model", "kind", str, "cnn"),
            conv_channels=get("model", "conv_channels", _ints, (16, 32)),
            loc_width=get("model", "loc_width", int, 256), loc_blocks=get("model", "loc_blocks", int, 4),
            dropout=get("model", "dropout", float, 0.5),
            mask=get("mask", "mode", str, "none"),
            topk_denominator=get("eval", "topk_denominator", str, "min"),
            eval_split=get("eval", "split", str, "test"),
            seed=get("run", "seed", int, 0), train=tc, gbrt=gc,
        )
        init = get("model", "init_from")
        if init is not None:
            kwargs["init_from"] = base / init if not Path(init).is_absolute() else Path(init)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, SdmError):
            raise
        raise UsageError(f"{path}: {exc}") from None
    for k in ("checklists", "species", "output"):
        if kwargs[k] is None:
            raise UsageError(f"{path}: [paths] {k} is required")
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**kwargs)


def write_config(path, cfg: PipelineConfig):
    cp = configparser.ConfigParser()
    rel = lambda v: "" if v is None else str(v)  # noqa: E731
    cp["paths"] = {k: rel(getattr(cfg, k)) for k in ("checklists", "species", "patches", "rangemaps", "output")}
    cp["data"] = {"min_checklists": str(cfg.min_checklists),
                  "months": "" if cfg.months is None else ",".join(map(str, cfg.months))}
    cp["split"] = {"min_dist_km": repr(cfg.min_dist_km), "ratios": ",".join(map(repr, cfg.ratios))}
    cp["features"] = {"use_env": str(cfg.use_env), "use_landcover": str(cfg.use_landcover),
                      "use_location": str(cfg.use_location), "crop_size": str(cfg.crop_size)}
    cp["model"] = {"kind": cfg.model, "conv_channels": ",".join(map(str, cfg.conv_channels)),
                   "loc_width": str(cfg.loc_width), "loc_blocks": str(cfg.loc_blocks),
                   "dropout": repr(cfg.dropout), "init_from": rel(cfg.init_from)}
    cp["train"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(cfg.train).items() if k != "seed"}
    cp["gbrt"] = {k: repr(v) if isinstance(v, float) else str(v) for k, v in asdict(cfg.gbrt).items()}
    cp["mask"] = {"mode": cfg.mask}
    cp["eval"] = {"topk_denominator": cfg.topk_denominator, "split": cfg.eval_split}
    cp["run"] = {"seed": str(cfg.seed)}
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)


# hashing / manifest ---------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(str(f.relative_to(path)).encode())
            h.update(_sha256(f).encode())
        return h.hexdigest()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_obj(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


class Manifest:
    def __init__(self, out: Path):
        self.path = out / MANIFEST
        self.data = json.loads(self.path.read_text()) if self.path.exists() else {"stages": {}}

    def save(self):
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self.data, indent=1, sort_keys=True) + "\n")
        tmp.replace(self.path)

    def stage(self, name) -> dict | None:
        return self.data["stages"].get(name)


# stages --------------------------------------------------------------------

class Pipeline:
    def __init__(self, cfg: PipelineConfig, force: bool = False):
        self.cfg = cfg
        self.out = cfg.output
        self.force = force
        self.manifest: Manifest | None = None

    def p(self, name) -> Path:
        return self.out / name

    # -- bookkeeping
    def _producer_of(self, filename):
        for name, rec in self.manifest.data["stages"].items():
            if filename in rec.get("outputs", {}):
                return name, rec
        return None, None

    def _input_hashes(self, stage, inputs: dict[str, Path]) -> dict[str, str]:
        hashes = {}
        for key, path in inputs.items():
            if not path.exists():
                hint = f" (run `{self._stage_producing(path.name)}` first)" if self._stage_producing(path.name) else ""
                raise MissingInputError(f"stage {stage}: missing input {path}{hint}")
            hashes[key] = _sha256(path)
            if path.parent == self.out:
                producer, rec = self._producer_of(path.name)
                if rec is None or rec.get("status") != "complete":
                    raise MissingInputError(f"stage {stage}: {path.name} has no complete producing stage")
                if rec["outputs"][path.name] != hashes[key]:
                    raise DataError(f"stage {stage}: {path.name} does not match the hash recorded by "
                                    f"stage {producer}; refusing to use a modified artifact")
        return hashes

    @staticmethod
    def _stage_producing(filename):
        return {TABLE: "build", SPLITS_CSV: "split", STATS: "train", MEAN_MODEL: "train", GBRT_MODEL: "train",
                CNN_MODEL: "train", RAW_PREDICTIONS: "predict", PREDICTIONS: "mask"}.get(filename)

    def _up_to_date(self, stage, params_hash, input_hashes) -> bool:
        rec = self.manifest.stage(stage)
        if self.force or rec is None or rec.get("status") != "complete":
            return False
        if rec.get("params_hash") != params_hash or rec.get("inputs") != input_hashes:
            return False
        return all(self.p(f).exists() and _sha256(self.p(f)) == h for f, h in rec["outputs"].items())

    def run_stage(self, stage: str) -> bool:
        """Run one stage; returns False if it was already up to date."""
        inputs = getattr(self, f"_inputs_{stage}")()
        params_hash = _hash_obj(self.cfg.stage_params(stage))
        input_hashes = self._input_hashes(stage, inputs)
        if self._up_to_date(stage, params_hash, input_hashes):
            log.info("stage %s up to date", stage)
            return False
        self.manifest.data["stages"][stage] = {"status": "running", "params_hash": params_hash,
                                               "inputs": input_hashes, "outputs": {}}
        self.manifest.save()
        try:
            outputs = getattr(self, f"_run_{stage}")()
        except SdmError as exc:
            self.manifest.data["stages"][stage]["status"] = "invalid"
            self.manifest.save()
            exc.args = (f"stage {stage}: {exc.args[0] if exc.args else exc}",) + tuple(exc.args[1:])
            raise
        except BaseException:
            self.manifest.data["stages"][stage]["status"] = "invalid"
            self.manifest.save()
            raise
        rec = self.manifest.data["stages"][stage]
        rec["outputs"] = {name: _sha256(self.p(name)) for name in outputs}
        rec["status"] = "complete"
        # downstream records are stale once an upstream stage re-ran
        for later in STAGES[STAGES.index(stage) + 1:]:
            if later in self.manifest.data["stages"]:
                self.manifest.data["stages"][later]["status"] = "stale"
        self.manifest.save()
        return True

    def __enter__(self):
        self.cfg.check_inputs()
        self.out.mkdir(parents=True, exist_ok=True)
        self.lock = FileLock(str(self.out / ".lock"))
        try:
            self.lock.acquire(timeout=60)
        except Timeout:
            raise DataError(f"output directory {self.out} is locked by another run") from None
        self.manifest = Manifest(self.out)
        self.manifest.data["config_hash"] = _hash_obj(self.cfg.as_dict())
        self.manifest.data["seed"] = self.cfg.seed
        self.manifest.save()
        return self

    def __exit__(self, *exc):
        self.lock.release()
        return False

    # -- shared loaders
    def _table(self) -> ck.EncounterTable:
        return ck.read_table(self.p(TABLE))

    def _splits(self):
        return read_splits(self.p(SPLITS_CSV), self.cfg.seed, self.cfg.ratios)

    def _split_table(self, table, split_name):
        sp = self._splits()
        return table.subset([h.id for h in table.hotspots if sp.split_of.get(h.id) == split_name])

    def _stacked(self, hotspot_ids) -> list[ft.RasterPatch]:
        cfg = self.cfg
        manifest = ft.read_band_manifest(cfg.patches / "bands.json") if (cfg.patches / "bands.json").exists() else None
        env_bands = manifest["env"] if manifest and manifest["env"] else ft.ENV_BANDS
        out = []
        for hid in hotspot_ids:
            img = ft.read_patch(ft.patch_path(cfg.patches, hid, "image"))
            env = ft.read_patch(ft.patch_path(cfg.patches, hid, "env")) if cfg.use_env else None
            lc = ft.read_patch(ft.patch_path(cfg.patches, hid, "landcover")) if cfg.use_landcover else None
            out.append(ft.center_crop(ft.stack_channels(img, env, lc, env_bands), cfg.crop_size))
        return out

    def _cnn_arrays(self, table, stats):
        patches = self._stacked(table.hotspot_ids)
        x = np.stack([ft.normalize(p, stats).data for p in patches]) if patches else None
        loc = (rescale_location([h.lat for h in table.hotspots], [h.lon for h in table.hotspots])
               if self.cfg.use_location else None)
        return x, loc

    def _env_features(self, table):
        return np.stack([ft.env_feature_vector(ft.read_patch(ft.patch_path(self.cfg.patches, hid, "env"))).values
                         for hid in table.hotspot_ids])

    def _read_checklists(self):
        species = ck.read_species_list(self.cfg.species)
        return ck.read_checklists_csv(self.cfg.checklists, species, months=self.cfg.months)

    # -- build
    def _inputs_build(self):
        d = {"checklists": self.cfg.checklists, "species": self.cfg.species}
        if self.cfg.rangemaps is not None:
            d["rangemaps"] = self.cfg.rangemaps
        return d

    def _run_build(self):
        species, lists, hotspots = self._read_checklists()
        table = ck.compute_encounter_rates(lists, hotspots, species, self.cfg.min_checklists)
        if self.cfg.rangemaps is not None:
            table = ck.apply_vagrant_correction(table, ck.read_range_maps(self.cfg.rangemaps, species))
        ck.write_table(self.p(TABLE), table)
        counts, mean = ck.species_count_histogram(ck.read_table(self.p(TABLE)))
        self.p(HISTOGRAM).write_text(json.dumps({"counts": counts.tolist(), "mean": mean}, indent=1) + "\n")
        return [TABLE, HISTOGRAM]

    # -- split
    def _inputs_split(self):
        return {"table": self.p(TABLE)}

    def _run_split(self):
        table = self._table()
        clusters = cluster_hotspots(table.hotspots, self.cfg.min_dist_km)
        write_splits(self.p(SPLITS_CSV), assign_splits(clusters, self.cfg.ratios, self.cfg.seed))
        return [SPLITS_CSV]

    # -- train
    def _inputs_train(self):
        d = {"table": self.p(TABLE), "splits": self.p(SPLITS_CSV)}
        if self.cfg.model != "mean":
            d["patches"] = self.cfg.patches
        if self.cfg.init_from is not None:
            d["init_from"] = self.cfg.init_from
        return d

    def _run_train(self):
        cfg = self.cfg
        table = self._table()
        tr = self._split_table(table, "train")
        if not tr.hotspots:
            raise DataError("training split is empty")
        if cfg.model == "mean":
            self.p(MEAN_MODEL).write_text(baselines.fit_mean_model(tr).to_json() + "\n")
            return [MEAN_MODEL]
        if cfg.model == "gbrt":
            ens = baselines.fit_gbrt(self._env_features(tr), tr, cfg.gbrt)
            baselines.save_gbrt(self.p(GBRT_MODEL), ens)
            return [GBRT_MODEL]

        stats = ft.compute_band_stats(self._stacked(tr.hotspot_ids))
        self.p(STATS).write_text(stats.to_json() + "\n")
        va = self._split_table(table, "val")
        x_tr, loc_tr = self._cnn_arrays(tr, stats)
        desc = CnnDescriptor(in_channels=x_tr.shape[1], n_species=len(table.species),
                             conv_channels=cfg.conv_channels, use_location=cfg.use_location,
                             loc_width=cfg.loc_width, loc_blocks=cfg.loc_blocks, dropout=cfg.dropout)
        if cfg.init_from is not None:
            model = load_checkpoint(cfg.init_from)
            extra = desc.in_channels - model.descriptor.in_channels
            if extra < 0:
                raise DataError("init checkpoint has more input channels than the configured features")
            if extra:
                model = expand_input_channels(model, extra, cfg.seed)
            if model.descriptor != desc:
                raise DataError(f"init checkpoint architecture {model.descriptor} does not match {desc}")
        else:
            model = build_cnn(desc, cfg.seed)
        train_set = Dataset(x_tr, tr.rates, loc_tr, tr.n_checklists)
        val_set = None
        if va.hotspots:
            x_va, loc_va = self._cnn_arrays(va, stats)
            val_set = Dataset(x_va, va.rates, loc_va, va.n_checklists)
        model, history = train_model(model, train_set, cfg.train, val_set)
        save_checkpoint(self.p(CNN_MODEL), model)
        write_train_log(self.p(TRAIN_LOG), history)
        return [STATS, CNN_MODEL, TRAIN_LOG]

    # -- predict
    def _model_files(self):
        return {"mean": [MEAN_MODEL], "gbrt": [GBRT_MODEL], "cnn": [STATS, CNN_MODEL]}[self.cfg.model]

    def _inputs_predict(self):
        d = {"table": self.p(TABLE), "splits": self.p(SPLITS_CSV)}
        d.update({f: self.p(f) for f in self._model_files()})
        if self.cfg.model != "mean":
            d["patches"] = self.cfg.patches
        return d

    def _run_predict(self):
        cfg = self.cfg
        target = self._split_table(self._table(), cfg.eval_split)
        if cfg.model == "mean":
            model = baselines.MeanRateModel.from_json(self.p(MEAN_MODEL).read_text())
            preds = model.predict(len(target.hotspots))
        elif cfg.model == "gbrt":
            ens = baselines.load_gbrt(self.p(GBRT_MODEL))
            preds = (baselines.predict_gbrt(ens, self._env_features(target)) if target.hotspots
                     else np.zeros((0, len(target.species))))
        else:
            stats = ft.NormalizationStats.from_json(self.p(STATS).read_text())
            model = load_checkpoint(self.p(CNN_MODEL))
            x, loc = self._cnn_arrays(target, stats)
            preds = predict_cnn(model, x, loc) if x is not None else np.zeros((0, len(target.species)))
        if not np.all(np.isfinite(preds)):
            from .errors import NumericError
            raise NumericError("non-finite predictions")
        ck.write_table(self.p(RAW_PREDICTIONS), target.with_rates(np.clip(preds, 0.0, 1.0)))
        return [RAW_PREDICTIONS]

    # -- mask
    def _inputs_mask(self):
        d = {"predictions": self.p(RAW_PREDICTIONS)}
        if self.cfg.mask == "hard":
            d["rangemaps"] = self.cfg.rangemaps
        elif self.cfg.mask == "soft":
            d.update({"checklists": self.cfg.checklists, "table": self.p(TABLE), "splits": self.p(SPLITS_CSV)})
        return d

    def _run_mask(self):
        cfg = self.cfg
        raw = ck.read_table(self.p(RAW_PREDICTIONS))
        outputs = [PREDICTIONS]
        if cfg.mask == "none":
            shutil.copyfile(self.p(RAW_PREDICTIONS), self.p(PREDICTIONS))
            return outputs
        if cfg.mask == "hard":
            maps = ck.read_range_maps(cfg.rangemaps, raw.species)
            preds = masking.hard_mask(raw.rates, raw.hotspots, maps)
        else:
            species, lists, _ = self._read_checklists()
            table = self._table()
            train_ids = set(self._split_table(table, "train").hotspot_ids)
            train_lists = [c for c in lists if c.hotspot_id in train_ids]
            factors = masking.compute_soft_mask_factors(train_lists, table.hotspots, len(species),
                                                        {h.region_id for h in table.hotspots})
            masking.write_factors(self.p(FACTORS), factors, species.names)
            preds = masking.apply_soft_mask(raw.rates, factors, raw.hotspots)
            outputs.append(FACTORS)
        ck.write_table(self.p(PREDICTIONS), raw.with_rates(preds))
        return outputs

    # -- eval
    def _inputs_eval(self):
        return {"predictions": self.p(PREDICTIONS), "table": self.p(TABLE), "splits": self.p(SPLITS_CSV)}

    def _run_eval(self):
        preds = ck.read_table(self.p(PREDICTIONS))
        truth = self._split_table(self._table(), self.cfg.eval_split)
        if preds.hotspot_ids != truth.hotspot_ids or preds.species.names != truth.species.names:
            raise DataError("predictions are not aligned with the evaluation split")
        report = metrics.evaluate(preds.rates, truth, topk_denominator=self.cfg.topk_denominator)
        self.p(REPORT).write_text(report.to_json())
        metrics.write_per_species_csv(self.p(PER_SPECIES), report)
        metrics.export_performance_geojson(report, self.p(GEOJSON))
        return [REPORT, PER_SPECIES, GEOJSON]


def run_stages(cfg: PipelineConfig, stages=STAGES, force: bool = False) -> dict[str, bool]:
    with Pipeline(cfg, force) as pipe:
        return {s: pipe.run_stage(s) for s in stages}


def run_pipeline(cfg: PipelineConfig, force: bool = False) -> metrics.EvalReport:
    run_stages(cfg, STAGES, force)
    return metrics.EvalReport.from_json((cfg.output / REPORT).read_text())
