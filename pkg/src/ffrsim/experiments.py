"""Parameter sweeps, calibration of unreported constants, and result files.

Configuration files are INI-style with one section per concern; every
physical quantity carries its unit in the key name::

    [network]
    lambda_bs_per_m2 = 0.01
    lambda_user_per_m2 = 0.1
    window_half_width_m = 100.0

    [ffr]
    threshold_T_db = 0.0
    power_ratio_a = 10.0
    base_power_w = 1.0
    subbands_N = 10

    [pathloss]
    alpha = 0.1
    beta = 1.0

    [simulation]
    coverage_threshold_db = -20.0
    n_drops = 100000
    master_seed = 20250101
    reuse_broadcast_fade = false
"""

from __future__ import annotations

import configparser
import csv
import itertools
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .analysis import average_ceu_probability
from .errors import ParameterError, QuadratureError
from .ffr import FfrConfig
from .geometry import Window
from .pathloss import PathLossParams
from .simulator import SimConfig, estimate_many

AXES = ("threshold_T_dB", "beta", "alpha", "power_ratio_a")
CSV_COLUMNS = ("axis", "overlay", "coverage", "coverage_ci", "ceu_density",
               "ceu_density_ci", "analytical_pe", "n_drops", "seed")

# --- configuration -----------------------------------------------------------


def config_to_dict(cfg: SimConfig) -> dict[str, dict]:
    return {
        "network": {
            "lambda_bs_per_m2": cfg.lambda_bs,
            "lambda_user_per_m2": cfg.lambda_user,
            "window_half_width_m": cfg.window.half_width,
        },
        "ffr": {
            "threshold_T_db": cfg.ffr.threshold_T_db,
            "power_ratio_a": cfg.ffr.power_ratio_a,
            "base_power_w": cfg.ffr.base_power_P,
            "subbands_N": cfg.ffr.subbands_N,
        },
        "pathloss": {"alpha": cfg.pathloss.alpha, "beta": cfg.pathloss.beta},
        "simulation": {
            "coverage_threshold_db": cfg.coverage_threshold_db,
            "n_drops": cfg.n_drops,
            "master_seed": cfg.master_seed,
            "reuse_broadcast_fade": cfg.reuse_broadcast_fade,
        },
    }


def config_from_dict(d: dict[str, dict]) -> SimConfig:
    default = config_to_dict(SimConfig())
    known = {section: set(keys) for section, keys in default.items()}
    for section, values in d.items():
        if section not in known:
            raise ParameterError(f"unknown config section [{section}]")
        unknown = set(values) - known[section]
        if unknown:
            raise ParameterError(f"unknown keys in [{section}]: {sorted(unknown)}")
    merged = {s: {**default[s], **d.get(s, {})} for s in default}
    net, ffr, pl, sim = merged["network"], merged["ffr"], merged["pathloss"], merged["simulation"]
    return SimConfig(
        lambda_bs=float(net["lambda_bs_per_m2"]),
        lambda_user=float(net["lambda_user_per_m2"]),
        window=Window(float(net["window_half_width_m"])),
        ffr=FfrConfig(
            threshold_T_db=float(ffr["threshold_T_db"]),
            power_ratio_a=float(ffr["power_ratio_a"]),
            base_power_P=float(ffr["base_power_w"]),
            subbands_N=int(ffr["subbands_N"]),
        ),
        pathloss=PathLossParams(float(pl["alpha"]), float(pl["beta"])),
        coverage_threshold_db=float(sim["coverage_threshold_db"]),
        n_drops=int(sim["n_drops"]),
        master_seed=int(sim["master_seed"]),
        reuse_broadcast_fade=_as_bool(sim["reuse_broadcast_fade"]),
    )


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"not a boolean: {value!r}")


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser()
    parser.optionxform = str  # keep subbands_N / threshold_T_db as written
    return parser


def read_config(path: str | os.PathLike) -> SimConfig:
    parser = _parser()
    if not parser.read(path):
        raise FileNotFoundError(f"config file not found: {path}")
    return config_from_dict({s: dict(parser[s]) for s in parser.sections()})


def write_config(cfg: SimConfig, path: str | os.PathLike) -> None:
    parser = _parser()
    for section, values in config_to_dict(cfg).items():
        # repr keeps floats round-trippable
        parser[section] = {k: (str(v).lower() if isinstance(v, bool) else repr(v)) for k, v in values.items()}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def apply_axis(cfg: SimConfig, axis: str, value: float) -> SimConfig:
    """Return ``cfg`` with one sweepable parameter replaced."""
    if axis in ("threshold_T_dB", "threshold_T_db"):
        return replace(cfg, ffr=replace(cfg.ffr, threshold_T_db=float(value)))
    if axis == "power_ratio_a":
        return replace(cfg, ffr=replace(cfg.ffr, power_ratio_a=float(value)))
    if axis == "alpha":
        return replace(cfg, pathloss=PathLossParams(float(value), cfg.pathloss.beta))
    if axis == "beta":
        return replace(cfg, pathloss=PathLossParams(cfg.pathloss.alpha, float(value)))
    raise ParameterError(f"unknown axis {axis!r}; expected one of {AXES}")


# --- sweeps ------------------------------------------------------------------


@dataclass(frozen=True)
class SweepSpec:
    base: SimConfig
    axis: str
    grid: tuple[float, ...]
    overlay_axis: str | None = None
    overlay_values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))
        object.__setattr__(self, "overlay_values", tuple(float(x) for x in self.overlay_values))
        if self.axis not in AXES:
            raise ParameterError(f"unknown axis {self.axis!r}; expected one of {AXES}")
        _check_grid(self.grid, "grid")
        if self.overlay_axis is not None:
            if self.overlay_axis not in AXES or self.overlay_axis == self.axis:
                raise ParameterError(f"invalid overlay axis {self.overlay_axis!r}")
            _check_grid(self.overlay_values, "overlay values", increasing=False)
        elif self.overlay_values:
            raise ParameterError("overlay values given without an overlay axis")
        self.configs()  # raises on values outside a parameter's range

    def points(self) -> list[tuple[float, float | None]]:
        overlays: Sequence[float | None] = self.overlay_values if self.overlay_axis else (None,)
        return [(x, o) for o in overlays for x in self.grid]

    def configs(self) -> list[SimConfig]:
        out = []
        for x, o in self.points():
            cfg = apply_axis(self.base, self.axis, x)
            if o is not None:
                cfg = apply_axis(cfg, self.overlay_axis, o)
            out.append(cfg)
        return out


def _check_grid(values: Sequence[float], what: str, increasing: bool = True) -> None:
    if not values:
        raise ParameterError(f"{what} must be non-empty")
    if not all(math.isfinite(v) for v in values):
        raise ParameterError(f"{what} must be finite")
    if increasing and any(b <= a for a, b in zip(values, values[1:])):
        raise ParameterError(f"{what} must be strictly increasing")
    if not increasing and len(set(values)) != len(values):
        raise ParameterError(f"{what} must not repeat")


@dataclass(frozen=True)
class SweepRow:
    axis: float
    overlay: float | None
    coverage: float
    coverage_ci: float
    ceu_density: float
    ceu_density_ci: float
    analytical_pe: float
    n_drops: int
    seed: int
    quadrature_failed: bool = False


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[SweepRow] = field(default_factory=list)

    def series(self, overlay: float | None = None) -> list[SweepRow]:
        return [r for r in self.rows if r.overlay == overlay]


def _analytical(cfg: SimConfig) -> tuple[float, bool]:
    try:
        return average_ceu_probability(cfg.lambda_bs, cfg.ffr.threshold_T, cfg.pathloss), False
    except QuadratureError:
        return math.nan, True


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Simulate every grid point (sharing drops across points) and attach the analytical p_e."""
    cfgs = spec.configs()
    estimates = estimate_many(cfgs, workers=workers)
    rows = []
    cache: dict[tuple, tuple[float, bool]] = {}
    for (x, o), cfg, est in zip(spec.points(), cfgs, estimates):
        key = (cfg.lambda_bs, cfg.ffr.threshold_T_db, cfg.pathloss)
        if key not in cache:
            cache[key] = _analytical(cfg)
        pe, failed = cache[key]
        rows.append(SweepRow(x, o, est.coverage, est.ci_half_width, est.ceu_density, est.ceu_ci_half_width,
                             pe, est.n_drops, cfg.master_seed, failed))
    return SweepResult(spec, rows)


# --- result files ------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    # repr is locale-independent and round-trips exactly
    return repr(float(value))


def sweep_metadata(spec: SweepSpec) -> dict:
    return {
        "artifact_version": __version__,
        "sim_config": config_to_dict(spec.base),
        "sweep": {
            "axis": spec.axis,
            "grid": list(spec.grid),
            "overlay_axis": spec.overlay_axis,
            "overlay_values": list(spec.overlay_values),
        },
    }


def spec_from_metadata(meta: dict) -> SweepSpec:
    sweep = meta["sweep"]
    return SweepSpec(
        base=config_from_dict(meta["sim_config"]),
        axis=sweep["axis"],
        grid=tuple(sweep["grid"]),
        overlay_axis=sweep.get("overlay_axis"),
        overlay_values=tuple(sweep.get("overlay_values", ())),
    )


def _json_number(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def emit(result: SweepResult, fmt: str, path: str | os.PathLike) -> Path:
    """Write ``result`` as CSV or JSON; returns the written path."""
    path = Path(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(CSV_COLUMNS)
                for r in result.rows:
                    writer.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
        elif fmt == "json":
            doc = {
                "metadata": sweep_metadata(result.spec),
                "rows": [{k: _json_number(v) for k, v in asdict(r).items()} for r in result.rows],
            }
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(doc, fh, indent=2)
                fh.write("\n")
        else:
            raise ParameterError(f"unknown format {fmt!r}; expected 'csv' or 'json'")
    except OSError as exc:
        raise OSError(f"could not write results to {path}: {exc}") from exc
    return path


def read_csv_rows(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def emit_plot_data(result: SweepResult, figure: str, path: str | os.PathLike) -> Path:
    """Long-format ``figure,series,x,metric,y,y_ci`` rows for external plotting."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["figure", "series", "x", "metric", "y", "y_ci"])
        label = result.spec.overlay_axis or ""
        for r in result.rows:
            series = f"{label}={_fmt(r.overlay)}" if r.overlay is not None else "all"
            writer.writerow([figure, series, _fmt(r.axis), "coverage", _fmt(r.coverage), _fmt(r.coverage_ci)])
            writer.writerow([figure, series, _fmt(r.axis), "ceu_density", _fmt(r.ceu_density),
                             _fmt(r.ceu_density_ci)])
            writer.writerow([figure, series, _fmt(r.axis), "analytical_pe", _fmt(r.analytical_pe), ""])
    return path


# --- calibration -------------------------------------------------------------

# Parameters each figure leaves unreported, and what the figure plots.
FREE_PARAMETERS = {
    "fig3": ("alpha",),
    "fig4": ("alpha", "beta"),
    "fig5": ("power_ratio_a", "threshold_T_dB"),
}
METRIC = {"fig3": "ceu_density", "fig4": "coverage", "fig5": "coverage"}

DEFAULT_GRIDS = {
    "alpha": tuple(float(x) for x in np.round(10.0 ** np.arange(-3.0, -0.25, 0.1), 5)),
    "beta": tuple(round(0.2 + 0.1 * i, 1) for i in range(19)),
    "power_ratio_a": (0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 20.0),
    "threshold_T_dB": tuple(float(t) for t in range(-20, 25, 5)),
}


@dataclass(frozen=True)
class Target:
    """One value read off a figure.

    ``point`` fixes the plotted coordinates (axis names as in :data:`AXES`);
    a one-sided statement such as "above 0.93" is encoded as the interval
    midpoint with half-width ``tolerance``.
    """

    figure: str
    point: tuple[tuple[str, float], ...]
    expected: float
    tolerance: float

    def __post_init__(self) -> None:
        if self.figure not in FREE_PARAMETERS:
            raise ParameterError(f"unknown figure {self.figure!r}")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")

    @classmethod
    def at(cls, figure: str, expected: float, tolerance: float, **point: float) -> "Target":
        return cls(figure, tuple(sorted(point.items())), expected, tolerance)


FIGURE_TARGETS: tuple[Target, ...] = (
    Target.at("fig3", 0.45, 0.05, threshold_T_dB=0.0, beta=0.5),
    Target.at("fig3", 0.30, 0.05, threshold_T_dB=0.0, beta=1.5),
    Target.at("fig3", 0.15, 0.05, threshold_T_dB=0.0, beta=2.0),
    Target.at("fig3", 0.965, 0.035, threshold_T_dB=20.0, beta=0.5),   # > 0.93
    Target.at("fig3", 0.35, 0.35, threshold_T_dB=20.0, beta=2.0),     # < 0.70
    Target.at("fig4", 0.905, 0.05, threshold_T_dB=-15.0, power_ratio_a=10.0),
    Target.at("fig4", 0.808, 0.05, threshold_T_dB=0.0, power_ratio_a=10.0),
    Target.at("fig4", 0.902, 0.05, threshold_T_dB=15.0, power_ratio_a=10.0),
    Target.at("fig4", 0.873, 0.05, threshold_T_dB=0.0, power_ratio_a=5.0),
    Target.at("fig4", 0.744, 0.05, threshold_T_dB=0.0, power_ratio_a=15.0),
    Target.at("fig5", 0.99, 0.07, alpha=0.1, beta=1.2),
    Target.at("fig5", 0.71, 0.07, alpha=0.01, beta=1.2),
    Target.at("fig5", 0.15, 0.07, alpha=0.001, beta=1.2),
)


@dataclass
class FigureCalibration:
    figure: str
    params: dict[str, float]
    score: float
    within_tolerance: bool
    residuals: list[dict]
    nearest_misses: list[dict]


@dataclass
class CalibrationRecord:
    version: int = 1
    artifact_version: str = __version__
    n_drops: int = 0
    master_seed: int = 0
    figures: dict[str, FigureCalibration] = field(default_factory=dict)

    def params(self, figure: str) -> dict[str, float]:
        fig = self.figures.get(figure)
        return dict(fig.params) if fig else {}

    def apply(self, figure: str, cfg: SimConfig) -> SimConfig:
        for name, value in self.params(figure).items():
            cfg = apply_axis(cfg, name, value)
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CalibrationRecord":
        figs = {k: FigureCalibration(**v) for k, v in d.get("figures", {}).items()}
        return cls(d.get("version", 1), d.get("artifact_version", __version__), d.get("n_drops", 0),
                   d.get("master_seed", 0), figs)

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")


def load_calibration(path: str | os.PathLike | None = None) -> CalibrationRecord:
    """Load a calibration record; the committed package record by default."""
    if path is None:
        text = resources.files("ffrsim").joinpath("data/calibration.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return CalibrationRecord.from_dict(json.loads(text))


def _evaluate_targets(targets: Sequence[Target], candidates: Sequence[dict[str, float]],
                      base: SimConfig, workers: int) -> np.ndarray:
    """Metric value for every (candidate, target) pair."""
    cfgs = []
    for cand in candidates:
        for t in targets:
            cfg = base
            for name, value in itertools.chain(cand.items(), t.point):
                cfg = apply_axis(cfg, name, value)
            cfgs.append(cfg)
    metric = METRIC[targets[0].figure]
    if metric == "ceu_density":
        cache: dict[tuple, float] = {}
        values = []
        for cfg in cfgs:
            key = (cfg.ffr.threshold_T_db, cfg.pathloss)
            if key not in cache:
                cache[key] = _analytical(cfg)[0]
            values.append(cache[key])
    else:
        values = [e.coverage for e in estimate_many(cfgs, workers=workers)]
    return np.asarray(values, dtype=float).reshape(len(candidates), len(targets))


def calibrate_unstated(targets: Iterable[Target], base: SimConfig | None = None,
                       grids: dict[str, Sequence[float]] | None = None,
                       workers: int = 1, keep_misses: int = 5) -> CalibrationRecord:
    """Grid-search each figure's unreported parameters against its targets.

    The score of a candidate is the largest ``|value - expected| / tolerance``
    over the figure's targets; the candidate with the lowest score wins
    (first in grid order on ties). ``within_tolerance`` is true when that
    score is at most 1. CEU-density targets use the analytical probability,
    coverage targets the simulator with ``base.n_drops`` drops shared by all
    candidates.
    """
    base = base or SimConfig(n_drops=20_000)
    grids = {**DEFAULT_GRIDS, **(grids or {})}
    record = CalibrationRecord(n_drops=base.n_drops, master_seed=base.master_seed)
    by_figure: dict[str, list[Target]] = {}
    for t in targets:
        by_figure.setdefault(t.figure, []).append(t)

    for figure, figure_targets in sorted(by_figure.items()):
        names = FREE_PARAMETERS[figure]
        candidates = [dict(zip(names, combo)) for combo in itertools.product(*(grids[n] for n in names))]
        values = _evaluate_targets(figure_targets, candidates, base, workers)
        expected = np.array([t.expected for t in figure_targets])
        tol = np.array([t.tolerance for t in figure_targets])
        scores = np.max(np.abs(values - expected) / tol, axis=1)
        scores = np.where(np.isnan(scores), np.inf, scores)
        ranking = np.argsort(scores, kind="stable")
        best = int(ranking[0])
        residuals = [
            {"point": dict(t.point), "expected": t.expected, "tolerance": t.tolerance,
             "value": float(values[best, j]), "residual": float(values[best, j] - t.expected)}
            for j, t in enumerate(figure_targets)
        ]
        misses = [{"params": candidates[i], "score": float(scores[i])} for i in ranking[1:1 + keep_misses]]
        record.figures[figure] = FigureCalibration(
            figure, candidates[best], float(scores[best]), bool(scores[best] <= 1.0), residuals, misses)
    return record


def calibration_report(record: CalibrationRecord) -> str:
    lines = [f"calibration record v{record.version} (n_drops={record.n_drops}, seed={record.master_seed})"]
    for name, fig in sorted(record.figures.items()):
        status = "within tolerance" if fig.within_tolerance else "NO candidate within tolerance"
        params = ", ".join(f"{k}={v:g}" for k, v in fig.params.items())
        lines.append(f"{name}: {params}  score={fig.score:.3f}  [{status}]")
        for r in fig.residuals:
            point = ", ".join(f"{k}={v:g}" for k, v in r["point"].items())
            lines.append(f"    {point}: expected {r['expected']:.3f} +/- {r['tolerance']:.3f}, "
                         f"got {r['value']:.4f} (residual {r['residual']:+.4f})")
        for m in fig.nearest_misses:
            params = ", ".join(f"{k}={v:g}" for k, v in m["params"].items())
            lines.append(f"    runner-up {params}: score {m['score']:.3f}")
    return "\n".join(lines)


# --- canned figure specs -----------------------------------------------------


def figure_spec(figure: str, record: CalibrationRecord | None = None, base: SimConfig | None = None,
                coarse: bool = False) -> SweepSpec:
    """Sweep reproducing one of the figures with the calibrated constants."""
    record = record if record is not None else load_calibration()
    base = record.apply(figure, base or SimConfig())
    if figure == "fig3":
        grid = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0) if coarse else tuple(float(t) for t in range(-10, 21))
        return SweepSpec(base, "threshold_T_dB", grid, "beta", (0.5, 1.5, 2.0))
    if figure == "fig4":
        grid = (-15.0, 0.0, 15.0) if coarse else tuple(float(t) for t in range(-15, 16))
        return SweepSpec(base, "threshold_T_dB", grid, "power_ratio_a", (5.0, 10.0, 15.0))
    if figure == "fig5":
        grid = (0.2, 0.5, 0.8, 1.2, 1.5, 2.0) if coarse else tuple(round(0.2 + 0.1 * i, 1) for i in range(19))
        return SweepSpec(base, "beta", grid, "alpha", (0.1, 0.01, 0.001))
    raise ParameterError(f"unknown figure {figure!r}; expected fig3, fig4 or fig5")
