"""End-to-end calibration experiment over an evolving hierarchy.

One run sizes a hierarchy under a fixed compute budget, evolves every
ensemble member and one observation trajectory continuously over the
horizon, fuses the hierarchy into a single forecast ensemble at each
observation time, and accumulates two PIT histograms: one from the
combined ensemble, one from the small finest ensemble alone.  All
artifacts are plain CSV/JSON, written deterministically byte for byte.
"""

import hashlib
import json
import math
import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, FileFormatError, MlmcForecastError, StructureError
from .forecast import ForecastEnsemble, generate_forecast
from .mlmc import Hierarchy, LevelPair, fixed_budget_sizes
from .sde import LevelGrid, OuParams
from .streams import NormalStream, StreamKey, StreamPurpose
from . import _kernels
from .verification import (
    DEFAULT_THRESHOLDS,
    CalibrationDiagnostics,
    DiagnosticThresholds,
    ObservationSeries,
    PitHistogram,
    analytic_pit_reference,
    build_histogram,
    diagnose,
    empirical_cdf,
    pit_sample,
    write_density_csv,
    write_histogram_csv,
)

SCENARIO_NAMES = ("calibrated", "underdispersed", "overdispersed", "biased")

# forecast-model (alpha, sigma2, mu) per scenario; the target model is the
# calibrated triple in every scenario.
SCENARIO_FORECAST_PARAMS = {
    "calibrated": (0.1, 0.1, 0.0),
    "underdispersed": (0.1, 0.02, 0.0),
    "overdispersed": (0.1, 0.5, 0.0),
    "biased": (0.4, 0.1, 0.2),
}
TARGET_PARAMS = (0.1, 0.1, 0.0)

FULL_HORIZON = 40000.0
FULL_BUDGET = 1.536e7
# Desk scale: 10x shorter horizon with the budget scaled to keep the same
# per-level ensemble sizes.
DESK_HORIZON = 4000.0
DESK_BUDGET = 1.536e6

_STREAM_BUFFER = 4096


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one scenario run depends on."""

    name: str
    forecast: OuParams
    target: OuParams
    horizon: float
    c_max: float
    seed: int
    observation_stride: float = 1.0
    observation_step: float = 2.0**-5
    top_level: int = 4
    base_step: float = 0.5
    refinement: int = 2
    alpha: int = 8
    bins: int = 20
    burn_in: float = 0.0
    x0: float = 0.0
    save_hierarchy: str = "final"

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {self.name!r}")
        expected = SCENARIO_FORECAST_PARAMS[self.name]
        got = (self.forecast.alpha, self.forecast.sigma2, self.forecast.mu)
        if got != expected:
            raise ConfigError(
                f"forecast params {got} do not match scenario {self.name!r} {expected}"
            )
        if (self.target.alpha, self.target.sigma2, self.target.mu) != TARGET_PARAMS:
            raise ConfigError(f"target params must be {TARGET_PARAMS}")
        if self.horizon <= 0 or self.c_max <= 0:
            raise ConfigError("horizon and c_max must be > 0")
        if self.alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if self.bins < 1:
            raise ConfigError(f"bins must be >= 1, got {self.bins}")
        if not 0 <= self.burn_in < self.horizon:
            raise ConfigError("burn_in must lie in [0, horizon)")
        if self.save_hierarchy not in ("none", "final", "all"):
            raise ConfigError(f"save_hierarchy must be none|final|all, got {self.save_hierarchy!r}")
        n_y = self.horizon / self.observation_stride
        if abs(n_y - round(n_y)) > 1e-9 or round(n_y) < 1:
            raise ConfigError("horizon must be a positive multiple of the observation stride")
        # stride must cover whole steps of every grid (which includes each
        # pair's coarse step, one level up) and of the observation path
        for step in [self.observation_step] + [g.step for g in self.grids]:
            k = self.observation_stride / step
            if abs(k - round(k)) > 1e-9 or round(k) < 1:
                raise ConfigError(
                    f"observation stride {self.observation_stride} is not a multiple of step {step}"
                )

    @property
    def grids(self) -> list:
        return [LevelGrid.for_level(l, self.base_step, self.refinement)
                for l in range(self.top_level + 1)]

    @property
    def observation_count(self) -> int:
        return round(self.horizon / self.observation_stride)


def scenario_config(name: str, seed: int, full: bool = False,
                    convention: str = "stationary", **overrides) -> ScenarioConfig:
    """Build the standard config for a named scenario.

    Desk scale by default (horizon 4000); ``full=True`` restores the
    horizon-40000 setup with the proportionally larger budget, leaving
    the per-level ensemble sizes unchanged.  ``overrides`` go straight
    into :class:`ScenarioConfig`.
    """
    if name not in SCENARIO_NAMES:
        raise ConfigError(f"unknown scenario {name!r}; pick one of {SCENARIO_NAMES}")
    fa, fs, fm = SCENARIO_FORECAST_PARAMS[name]
    ta, ts, tm = TARGET_PARAMS
    defaults = {
        "horizon": FULL_HORIZON if full else DESK_HORIZON,
        "c_max": FULL_BUDGET if full else DESK_BUDGET,
    }
    defaults.update(overrides)
    return ScenarioConfig(
        name=name,
        forecast=OuParams(fa, fm, fs, convention=convention),
        target=OuParams(ta, tm, ts, convention=convention),
        seed=seed,
        **defaults,
    )


@dataclass
class RunArtifacts:
    """In-memory summary of one scenario run plus the emitted files."""

    scenario: str
    out_dir: Optional[Path]
    sizes: list
    observation_count: int
    mlpit: PitHistogram
    pit_finest: PitHistogram
    diagnostics: CalibrationDiagnostics
    finest_diagnostics: CalibrationDiagnostics
    files: dict = field(default_factory=dict)


class _EvolvingEnsembles:
    """Carries every ensemble member of a hierarchy forward in time.

    Member i of level l draws from the stream keyed (seed, l, i), so the
    realized paths do not depend on how the time axis is chunked.
    """

    def __init__(self, cfg: ScenarioConfig, sizes):
        params = cfg.forecast
        self._alpha = params.alpha
        self._mu = params.mu
        self._scale = params.noise_scale
        grids = cfg.grids
        self._grids = grids
        self._stride = cfg.observation_stride
        self.level0 = np.full(int(sizes[0]), float(cfg.x0))
        self._level0_streams = [
            NormalStream(StreamKey(cfg.seed, 0, i, StreamPurpose.PATH_NOISE),
                         buffer=_STREAM_BUFFER)
            for i in range(int(sizes[0]))
        ]
        self._level0_steps = round(self._stride / grids[0].step)
        self.pairs_fine = []
        self.pairs_coarse = []
        self._pair_streams = []
        self._pair_steps = []
        for l in range(1, len(sizes)):
            n = int(sizes[l])
            self.pairs_fine.append(np.full(n, float(cfg.x0)))
            self.pairs_coarse.append(np.full(n, float(cfg.x0)))
            self._pair_streams.append([
                NormalStream(StreamKey(cfg.seed, l, i, StreamPurpose.PATH_NOISE),
                             buffer=_STREAM_BUFFER)
                for i in range(n)
            ])
            self._pair_steps.append(round(self._stride / grids[l].step))

    def _increments(self, streams, n_steps, step):
        dw = np.empty((len(streams), n_steps))
        root = math.sqrt(step)
        for row, stream in enumerate(streams):
            dw[row] = root * stream.take(n_steps)
        return dw

    def advance_one_stride(self):
        dw = self._increments(self._level0_streams, self._level0_steps,
                              self._grids[0].step)
        _kernels.ou_advance(self.level0, dw, self._alpha, self._mu, self._scale,
                            self._grids[0].step)
        for l, (fine, coarse) in enumerate(zip(self.pairs_fine, self.pairs_coarse)):
            grid = self._grids[l + 1]
            dw = self._increments(self._pair_streams[l], self._pair_steps[l], grid.step)
            _kernels.ou_coupled_advance(fine, coarse, dw, self._alpha, self._mu,
                                        self._scale, grid.step, grid.refinement)

    def snapshot(self) -> Hierarchy:
        return Hierarchy(
            level0=self.level0.copy(),
            pairs=tuple(LevelPair(fine=f.copy(), coarse=c.copy())
                        for f, c in zip(self.pairs_fine, self.pairs_coarse)),
            grids=tuple(self._grids),
        )


class _EvolvingObservation:
    """The single observed trajectory, stepped at its own fine resolution."""

    def __init__(self, cfg: ScenarioConfig):
        params = cfg.target
        self._params = params
        self._step = cfg.observation_step
        self._steps_per_stride = round(cfg.observation_stride / cfg.observation_step)
        self._stream = NormalStream(
            StreamKey(cfg.seed, 0, 0, StreamPurpose.OBSERVATION_NOISE),
            buffer=_STREAM_BUFFER,
        )
        self._state = np.array([float(cfg.x0)])

    def advance_one_stride(self) -> float:
        dw = (math.sqrt(self._step)
              * self._stream.take(self._steps_per_stride)).reshape(1, -1)
        _kernels.ou_advance(self._state, dw, self._params.alpha, self._params.mu,
                            self._params.noise_scale, self._step)
        return float(self._state[0])


class _HierarchyCsvWriter:
    """Streams (level, sample_index, time, fine_value, coarse_value) rows."""

    HEADER = ["level", "sample_index", "time", "fine_value", "coarse_value"]

    def __init__(self, path):
        self._fh = open(path, "w", newline="")
        self._writer = csv.writer(self._fh, lineterminator="\n")
        self._writer.writerow(self.HEADER)

    def write(self, time: float, h: Hierarchy) -> None:
        t = repr(float(time))
        for i, v in enumerate(h.level0):
            self._writer.writerow([0, i, t, repr(float(v)), ""])
        for l, pair in enumerate(h.pairs, start=1):
            for i, (fv, cv) in enumerate(zip(pair.fine, pair.coarse)):
                self._writer.writerow([l, i, t, repr(float(fv)), repr(float(cv))])

    def close(self) -> None:
        self._fh.close()


def read_time_hierarchy_csv(path):
    """Read back per-time hierarchies as [(time, Hierarchy)], time-ascending."""
    blocks: dict = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _HierarchyCsvWriter.HEADER:
            raise FileFormatError(f"unexpected header {header}")
        for row_no, row in enumerate(reader, start=1):
            if len(row) != 5:
                raise FileFormatError("expected 5 columns", row=row_no)
            try:
                level = int(row[0])
                index = int(row[1])
                time = float(row[2])
                fine = float(row[3])
            except ValueError as exc:
                raise FileFormatError(str(exc), row=row_no) from None
            if level < 0 or index < 0:
                raise FileFormatError("negative level or index", row=row_no)
            if level == 0:
                if row[4] != "":
                    raise FileFormatError("level 0 must not carry a coarse value", row=row_no)
                coarse = None
            else:
                try:
                    coarse = float(row[4])
                except ValueError:
                    raise FileFormatError("missing coarse value", row=row_no) from None
            blocks.setdefault(time, {}).setdefault(level, []).append((index, fine, coarse, row_no))
    if not blocks:
        raise FileFormatError(f"no hierarchy rows in {path}")
    out = []
    for time in sorted(blocks):
        per_level = blocks[time]
        levels = sorted(per_level)
        if levels != list(range(len(levels))):
            raise FileFormatError(f"levels at time {time} are not contiguous: {levels}")
        arrays = []
        for level in levels:
            rows = sorted(per_level[level])
            if [r[0] for r in rows] != list(range(len(rows))):
                raise FileFormatError(
                    f"sample indices at time {time}, level {level} are not contiguous",
                    row=rows[-1][3],
                )
            arrays.append(rows)
        h = Hierarchy(
            level0=np.array([r[1] for r in arrays[0]]),
            pairs=tuple(
                LevelPair(fine=np.array([r[1] for r in rows]),
                          coarse=np.array([r[2] for r in rows]))
                for rows in arrays[1:]
            ),
        )
        out.append((time, h))
    return out


def write_observations_csv(series: ObservationSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "value"])
        for t, v in zip(series.times, series.values):
            writer.writerow([repr(float(t)), repr(float(v))])


def read_observations_csv(path) -> ObservationSeries:
    times = []
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["time", "value"]:
            raise FileFormatError(f"unexpected header {header}")
        for row_no, row in enumerate(reader, start=1):
            if len(row) != 2:
                raise FileFormatError("expected 2 columns", row=row_no)
            try:
                times.append(float(row[0]))
                values.append(float(row[1]))
            except ValueError as exc:
                raise FileFormatError(str(exc), row=row_no) from None
    if not times:
        raise FileFormatError(f"no observation rows in {path}")
    return ObservationSeries(times=np.array(times), values=np.array(values))


def _diagnostics_dict(diag: CalibrationDiagnostics, hist: PitHistogram) -> dict:
    return {
        "counts": [int(c) for c in hist.counts],
        "bins": hist.bins,
        "total": hist.total,
        "max_relative_deviation": diag.max_relative_deviation,
        "endpoint_ratio": diag.endpoint_ratio,
        "skew": diag.skew,
        "classification": diag.classification.value,
    }


def _write_json(payload: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _manifest(out_dir: Path, names, extra: dict) -> dict:
    files = {}
    for name in sorted(names):
        p = out_dir / name
        files[name] = {"sha256": _sha256(p), "bytes": p.stat().st_size}
    payload = dict(extra)
    payload["files"] = files
    payload["package_version"] = __version__
    return payload


def run_scenario(cfg: ScenarioConfig, out_dir=None,
                 thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS) -> RunArtifacts:
    """Run one scenario end to end; write artifacts when out_dir is given.

    Emits observations.csv, mlpit.csv, pit_finest.csv, diagnostics.json,
    reference_density.csv, hierarchy.csv (per cfg.save_hierarchy) and
    manifest.json.  A failure mid-run leaves a failure.json marker next
    to whatever was already flushed, then re-raises.
    """
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    try:
        return _run_scenario_inner(cfg, out, thresholds)
    except Exception as exc:
        if out is not None:
            _write_json({"scenario": cfg.name, "seed": cfg.seed, "error": str(exc)},
                        out / "failure.json")
        raise


def _run_scenario_inner(cfg: ScenarioConfig, out: Optional[Path],
                        thresholds: DiagnosticThresholds) -> RunArtifacts:
    grids = cfg.grids
    sizes = fixed_budget_sizes(cfg.c_max, cfg.horizon, grids)
    engine = _EvolvingEnsembles(cfg, sizes)
    observation = _EvolvingObservation(cfg)

    hierarchy_writer = None
    if out is not None and cfg.save_hierarchy == "all":
        hierarchy_writer = _HierarchyCsvWriter(out / "hierarchy.csv")

    obs_times = np.empty(cfg.observation_count)
    obs_values = np.empty(cfg.observation_count)
    mlpit_values = []
    finest_values = []
    final_snapshot = None
    for k in range(1, cfg.observation_count + 1):
        engine.advance_one_stride()
        y = observation.advance_one_stride()
        t_k = k * cfg.observation_stride
        obs_times[k - 1] = t_k
        obs_values[k - 1] = y
        snapshot = engine.snapshot()
        if hierarchy_writer is not None:
            hierarchy_writer.write(t_k, snapshot)
        if k == cfg.observation_count:
            final_snapshot = snapshot
        if t_k > cfg.burn_in:
            fe = generate_forecast(
                snapshot, cfg.alpha,
                StreamKey(cfg.seed, 0, k, StreamPurpose.QUANTILE_UNIFORM),
            )
            mlpit_values.append(pit_sample(fe, y))
            finest_values.append(empirical_cdf(snapshot.finest_fine, y))
    if hierarchy_writer is not None:
        hierarchy_writer.close()

    series = ObservationSeries(times=obs_times, values=obs_values)
    mlpit = build_histogram(mlpit_values, cfg.bins)
    pit_finest = build_histogram(finest_values, int(sizes[-1]) + 1)
    diag = diagnose(mlpit, thresholds)
    diag_finest = diagnose(pit_finest, thresholds)

    artifacts = RunArtifacts(
        scenario=cfg.name,
        out_dir=out,
        sizes=[int(n) for n in sizes],
        observation_count=len(mlpit_values),
        mlpit=mlpit,
        pit_finest=pit_finest,
        diagnostics=diag,
        finest_diagnostics=diag_finest,
    )
    if out is None:
        return artifacts

    write_observations_csv(series, out / "observations.csv")
    write_histogram_csv(mlpit, out / "mlpit.csv")
    write_histogram_csv(pit_finest, out / "pit_finest.csv")
    r, g = analytic_pit_reference(cfg.forecast.stationary_law(),
                                  cfg.target.stationary_law(), n_grid=200)
    write_density_csv(r, g, out / "reference_density.csv")
    if cfg.save_hierarchy == "final":
        writer = _HierarchyCsvWriter(out / "hierarchy.csv")
        writer.write(cfg.horizon, final_snapshot)
        writer.close()
    _write_json(
        {
            "scenario": cfg.name,
            "seed": cfg.seed,
            "horizon": cfg.horizon,
            "c_max": cfg.c_max,
            "alpha": cfg.alpha,
            "bins": cfg.bins,
            "burn_in": cfg.burn_in,
            "convention": cfg.forecast.convention,
            "hierarchy_sizes": artifacts.sizes,
            "observation_count": artifacts.observation_count,
            "thresholds": {
                "max_deviation": thresholds.max_deviation,
                "skew": thresholds.skew,
                "ratio_high": thresholds.ratio_high,
                "ratio_low": thresholds.ratio_low,
            },
            "mlpit": _diagnostics_dict(diag, mlpit),
            "pit_finest": _diagnostics_dict(diag_finest, pit_finest),
        },
        out / "diagnostics.json",
    )
    names = ["observations.csv", "mlpit.csv", "pit_finest.csv",
             "reference_density.csv", "diagnostics.json"]
    if cfg.save_hierarchy != "none":
        names.append("hierarchy.csv")
    manifest = _manifest(out, names, {"scenario": cfg.name, "seed": cfg.seed})
    _write_json(manifest, out / "manifest.json")
    artifacts.files = {name: info["sha256"] for name, info in manifest["files"].items()}
    return artifacts


def verify_files(hierarchy_path, observations_path, seed: int, alpha: int = 8,
                 bins: int = 20, out_dir=None, burn_in: float = 0.0,
                 thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS) -> RunArtifacts:
    """Re-run forecast fusion and calibration from serialized files.

    The hierarchy file must hold one hierarchy per verification time;
    each time must have a matching observation.  Forecast uniforms are
    keyed by (seed, ordinal position of the time in the file), so a file
    produced by :func:`run_scenario` with ``save_hierarchy="all"`` and
    the same seed reproduces the in-memory MLPIT exactly.
    """
    hierarchies = read_time_hierarchy_csv(hierarchy_path)
    series = read_observations_csv(observations_path)
    lookup = {float(t): float(v) for t, v in zip(series.times, series.values)}
    sizes = hierarchies[0][1].sizes
    mlpit_values = []
    finest_values = []
    for k, (time, h) in enumerate(hierarchies, start=1):
        if h.sizes != sizes:
            raise StructureError(
                f"hierarchy at time {time} has sizes {h.sizes}, expected {sizes}"
            )
        if time not in lookup:
            raise FileFormatError(f"no observation at hierarchy time {time}")
        if time <= burn_in:
            continue
        fe = generate_forecast(
            h, alpha, StreamKey(seed, 0, k, StreamPurpose.QUANTILE_UNIFORM)
        )
        y = lookup[time]
        mlpit_values.append(pit_sample(fe, y))
        finest_values.append(empirical_cdf(h.finest_fine, y))
    if not mlpit_values:
        raise FileFormatError("burn-in removed every verification time")
    mlpit = build_histogram(mlpit_values, bins)
    pit_finest = build_histogram(finest_values, int(sizes[-1]) + 1)
    diag = diagnose(mlpit, thresholds)
    diag_finest = diagnose(pit_finest, thresholds)
    out = Path(out_dir) if out_dir is not None else None
    artifacts = RunArtifacts(
        scenario="files",
        out_dir=out,
        sizes=list(sizes),
        observation_count=len(mlpit_values),
        mlpit=mlpit,
        pit_finest=pit_finest,
        diagnostics=diag,
        finest_diagnostics=diag_finest,
    )
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_histogram_csv(mlpit, out / "mlpit.csv")
        write_histogram_csv(pit_finest, out / "pit_finest.csv")
        _write_json(
            {
                "source_hierarchy": str(hierarchy_path),
                "source_observations": str(observations_path),
                "seed": seed,
                "alpha": alpha,
                "bins": bins,
                "burn_in": burn_in,
                "hierarchy_sizes": artifacts.sizes,
                "observation_count": artifacts.observation_count,
                "mlpit": _diagnostics_dict(diag, mlpit),
                "pit_finest": _diagnostics_dict(diag_finest, pit_finest),
            },
            out / "diagnostics.json",
        )
        manifest = _manifest(out, ["mlpit.csv", "pit_finest.csv", "diagnostics.json"],
                             {"seed": seed})
        _write_json(manifest, out / "manifest.json")
        artifacts.files = {name: info["sha256"] for name, info in manifest["files"].items()}
    return artifacts


_CONFIG_DEFAULTS = {
    "scenarios": list(SCENARIO_NAMES),
    "out_dir": None,
    "full": False,
    "horizon": None,
    "c_max": None,
    "alpha": 8,
    "bins": 20,
    "burn_in": 0.0,
    "save_hierarchy": "final",
    "convention": "stationary",
}


def normalize_config(raw: dict) -> dict:
    """Validate a config mapping and fill defaults; see the README schema."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(_CONFIG_DEFAULTS) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    if "seed" not in raw:
        raise ConfigError("missing required field 'seed'")
    if not isinstance(raw["seed"], int) or isinstance(raw["seed"], bool):
        raise ConfigError("field 'seed': expected an integer")
    cfg = dict(_CONFIG_DEFAULTS)
    cfg.update(raw)
    scenarios = cfg["scenarios"]
    if scenarios == "all":
        scenarios = list(SCENARIO_NAMES)
    if (not isinstance(scenarios, list) or not scenarios
            or any(s not in SCENARIO_NAMES for s in scenarios)):
        raise ConfigError(
            f"field 'scenarios': expected a non-empty subset of {SCENARIO_NAMES}"
        )
    cfg["scenarios"] = scenarios
    for key in ("horizon", "c_max", "burn_in"):
        if cfg[key] is not None and not isinstance(cfg[key], (int, float)):
            raise ConfigError(f"field {key!r}: expected a number")
    for key in ("alpha", "bins"):
        if not isinstance(cfg[key], int) or isinstance(cfg[key], bool) or cfg[key] < 1:
            raise ConfigError(f"field {key!r}: expected a positive integer")
    if not isinstance(cfg["full"], bool):
        raise ConfigError("field 'full': expected a boolean")
    if cfg["save_hierarchy"] not in ("none", "final", "all"):
        raise ConfigError("field 'save_hierarchy': expected none|final|all")
    if cfg["convention"] not in ("stationary", "literal"):
        raise ConfigError("field 'convention': expected stationary|literal")
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    return normalize_config(raw)


def _scenario_overrides(cfg: dict) -> dict:
    overrides = {
        "alpha": cfg["alpha"],
        "bins": cfg["bins"],
        "burn_in": cfg["burn_in"],
        "save_hierarchy": cfg["save_hierarchy"],
    }
    if cfg["horizon"] is not None:
        overrides["horizon"] = float(cfg["horizon"])
    if cfg["c_max"] is not None:
        overrides["c_max"] = float(cfg["c_max"])
    return overrides


def run_all(cfg: dict, out_dir,
            thresholds: DiagnosticThresholds = DEFAULT_THRESHOLDS) -> dict:
    """Run the configured scenarios with one shared seed and write a report.

    The observation trajectory depends only on (seed, target model), so
    every scenario is verified against the identical realization.
    """
    cfg = normalize_config(cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report: dict = {"seed": cfg["seed"], "scenarios": {}}
    for name in cfg["scenarios"]:
        scenario = scenario_config(name, cfg["seed"], full=cfg["full"],
                                   convention=cfg["convention"],
                                   **_scenario_overrides(cfg))
        artifacts = run_scenario(scenario, out / name, thresholds)
        report["scenarios"][name] = {
            "classification": artifacts.diagnostics.classification.value,
            "finest_classification": artifacts.finest_diagnostics.classification.value,
            "hierarchy_sizes": artifacts.sizes,
            "observation_count": artifacts.observation_count,
            "files": artifacts.files,
        }
    _write_json(report, out / "report.json")
    return report
