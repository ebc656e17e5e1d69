"""
Experiment driver: single-point reports and sweeps over T, R or SNR.

An :class:`ExperimentConfig` describes one configuration plus an optional
sweep axis. :func:`run_experiment` returns one :class:`MetricsReport` per
(sweep point, method) and :func:`emit_csv` writes them out.

Timing covers the synthesis call only. Channel generation, geometry
precomputation and metric evaluation are excluded, and garbage collection
is paused while the clock runs. One batched call synthesizes all ``2R``
beams of a scenario, so its duration is the per-scenario sum of per-beam
synthesis times.
"""

import csv
import dataclasses
import gc
import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .channel import ChannelConfig, generate_ensemble, random_layout
from .errors import ConfigError, HcsError, InvalidParam
from .geometry import C0, ElementFactor, make_ula
from .metrics import MetricsReport, NoiseModel, beam_capacities, to_db
from .pattern import AngularGrid, PatternIntegrator, SectorSpec
from .synthesis import HcsSynthesizer, iso_excitation_set, zf_excitation_set

__all__ = [
    "METHODS",
    "DEFAULT_SWEEPS",
    "ExperimentConfig",
    "SweepPointError",
    "run_experiment",
    "emit_csv",
    "read_csv",
    "summary_table",
    "worker_count",
]

METHODS = ("zf", "iso", "hcs")
SWEEP_AXES = ("T", "R", "SNR")
DEFAULT_SWEEPS = {
    "T": (32, 48, 72, 104),
    "R": (4, 8, 16, 24),
    "SNR": (10.0, 20.0, 30.0, 40.0),
}
CSV_FIELDS = ["fingerprint", "T", "R", "P", "snr_db", "method", "C_ave", "I_ave_db", "I_mean_db", "D_ave_db", "tau_s"]
BEAM_FIELDS = ["fingerprint", "method", "r", "chi", "C", "I_db", "D_db"]


class SweepPointError(HcsError):
    """A synthesis or metric failure, tagged with the sweep point where it happened."""

    def __init__(self, point, method, scenario, cause):
        self.point = dict(point)
        self.method = method
        self.scenario = scenario
        self.cause = cause
        where = ", ".join(f"{k}={v}" for k, v in self.point.items())
        super().__init__(f"{method} failed at {where}, scenario {scenario}: {cause}")


def worker_count(env=None):
    """
    Worker threads from ``HCS_THREADS``; unset or 0 means one per CPU.
    """
    env = os.environ if env is None else env
    raw = env.get("HCS_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"HCS_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("HCS_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def _fmt(x):
    return format(float(x), ".9g")


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """
    One experiment.

    Attributes
    ----------
    T, R, P : int
        Array elements, receivers and channel scenarios.
    d_over_lambda : float
        Element spacing in wavelengths.
    f : float
        Carrier frequency in Hz.
    snr_db : float
        ``10 log10(omega / sigma^2)``.
    sector : SectorSpec
        Coverage cell; receivers are placed inside it.
    channel : ChannelConfig
        Stochastic channel parameters. Its ``seed`` and ``P`` are
        overridden by the experiment's.
    element : ElementFactor
        Embedded element pattern.
    methods : tuple of str
        Subset of ``("zf", "iso", "hcs")``.
    sweep : str or None
        ``"T"``, ``"R"`` or ``"SNR"``.
    values : tuple or None
        Sweep values; defaults to :data:`DEFAULT_SWEEPS` for the axis.
    seed : int
        Seeds both the receiver layout and the channel.
    grid : tuple of int
        ``(n_theta, n_phi)`` of the midpoint quadrature grid.
    out : str
        Output directory.
    """

    T: int = 32
    R: int = 16
    P: int = 100
    d_over_lambda: float = 0.5
    f: float = 2.0e9
    snr_db: float = 20.0
    sector: SectorSpec = dataclasses.field(default_factory=SectorSpec.from_degrees)
    channel: ChannelConfig = dataclasses.field(default_factory=ChannelConfig)
    element: ElementFactor = dataclasses.field(default_factory=lambda: ElementFactor.cosine(0.5, 32.0))
    methods: tuple = METHODS
    sweep: str = None
    values: tuple = None
    seed: int = 0
    grid: tuple = (361, 721)
    out: str = "results"

    def __post_init__(self):
        for name in ("T", "R", "P", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {v!r}")
        if self.T < 1 or self.R < 1 or self.P < 1:
            raise ConfigError("T, R and P must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if not (self.d_over_lambda > 0 and self.f > 0 and np.isfinite(self.snr_db)):
            raise ConfigError("d_over_lambda and f must be positive and snr_db finite")
        methods = tuple(m.lower() for m in self.methods)
        if not methods or any(m not in METHODS for m in methods) or len(set(methods)) != len(methods):
            raise ConfigError(f"methods must be a non-empty subset of {METHODS}, got {self.methods!r}")
        object.__setattr__(self, "methods", methods)
        if self.sweep is not None:
            axis = str(self.sweep).upper()
            if axis not in SWEEP_AXES:
                raise ConfigError(f"sweep axis must be one of {SWEEP_AXES}, got {self.sweep!r}")
            object.__setattr__(self, "sweep", axis)
            values = DEFAULT_SWEEPS[axis] if self.values is None else tuple(self.values)
            if not values:
                raise ConfigError("sweep values must be non-empty")
            numeric = all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in values)
            if not numeric or not np.all(np.isfinite(values)) or axis != "SNR" and any(int(v) != v for v in values):
                raise ConfigError(f"invalid {axis} sweep values {values!r}")
            object.__setattr__(self, "values", values)
        elif self.values is not None:
            raise ConfigError("sweep values given without a sweep axis")
        if len(self.grid) != 2 or min(self.grid) < 8:
            raise ConfigError("grid must be (n_theta, n_phi) with both >= 8")
        for T, R, _ in self.points():
            if T < 1 or R < 1 or int(T) != T or int(R) != R:
                raise ConfigError(f"sweep produced invalid counts T={T}, R={R}")
            if R > T and set(methods) & {"zf", "hcs"}:
                raise ConfigError(f"ZF and HCS need 2R <= 2T, got T={T}, R={R}")

    # --- construction -------------------------------------------------
    @classmethod
    def from_dict(cls, data):
        """
        Build from a JSON-style mapping.

        ``sector`` is ``{"theta_deg": [lo, hi], "phi_deg": [lo, hi]}``;
        ``sweep`` is an axis name or ``{"axis": ..., "values": [...]}``;
        ``channel`` and ``element`` take the fields of
        :class:`ChannelConfig` and :class:`ElementFactor`.
        """
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "sector" in data:
                s = data["sector"]
                th = s.get("theta_deg", (0.0, 180.0))
                ph = s.get("phi_deg", (-60.0, 60.0))
                data["sector"] = SectorSpec.from_degrees(th[0], th[1], ph[0], ph[1])
            if "channel" in data:
                ch = dict(data["channel"])
                if ch.get("cluster_azimuth_deg") is not None:
                    ch["cluster_azimuth_deg"] = tuple(ch["cluster_azimuth_deg"])
                data["channel"] = ChannelConfig(**ch)
            if "element" in data:
                data["element"] = ElementFactor(**data["element"])
            if isinstance(data.get("sweep"), dict):
                sw = dict(data.pop("sweep"))
                data["sweep"] = sw.pop("axis", None)
                if "values" in sw:
                    data["values"] = sw.pop("values")
                if sw:
                    raise ConfigError(f"unknown sweep keys: {sorted(sw)}")
            for key in ("methods", "values", "grid"):
                if data.get(key) is not None:
                    if isinstance(data[key], str):
                        data[key] = data[key].split(",")
                    data[key] = tuple(data[key])
            return cls(**data)
        except ConfigError:
            raise
        except (InvalidParam, TypeError, ValueError, KeyError, AttributeError, IndexError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def from_json(cls, path):
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def with_overrides(self, sweep=None, seed=None, out=None, methods=None):
        """Apply CLI overrides. A new sweep axis drops values meant for another axis."""
        changes = {}
        if sweep is not None:
            axis = sweep.upper()
            changes["sweep"] = axis
            changes["values"] = self.values if axis == self.sweep else None
        if seed is not None:
            changes["seed"] = seed
        if out is not None:
            changes["out"] = str(out)
        if methods is not None:
            changes["methods"] = tuple(m.strip() for m in methods.split(",") if m.strip()) if isinstance(methods, str) else tuple(methods)
        return dataclasses.replace(self, **changes)

    # --- sweep points -------------------------------------------------
    def points(self):
        """``(T, R, snr_db)`` for every sweep point, in order."""
        if self.sweep is None:
            return [(self.T, self.R, float(self.snr_db))]
        if self.sweep == "T":
            return [(int(v), self.R, float(self.snr_db)) for v in self.values]
        if self.sweep == "R":
            return [(self.T, int(v), float(self.snr_db)) for v in self.values]
        return [(self.T, self.R, float(v)) for v in self.values]

    def point_dict(self, T, R, snr_db):
        """Everything that determines the metrics at one point."""
        return {
            "T": int(T),
            "R": int(R),
            "P": int(self.P),
            "snr_db": float(snr_db),
            "d_over_lambda": float(self.d_over_lambda),
            "f": float(self.f),
            "sector": [float(v) for v in self.sector.to_degrees()],
            "channel": {
                k: (list(v) if isinstance(v, tuple) else v)
                for k, v in dataclasses.asdict(self.channel).items()
                if k not in ("seed", "P")
            },
            "element": self.element.to_dict(),
            "grid": [int(v) for v in self.grid],
            "seed": int(self.seed),
        }

    def fingerprint(self, T, R, snr_db):
        blob = json.dumps(self.point_dict(T, R, snr_db), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _beam_metrics(integrator, noise, G, W):
    C = beam_capacities(G, W, noise)
    I = integrator.interference_ratio(W)
    D = integrator.directivity(W)
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(I)) and np.all(D > 0)):
        raise FloatingPointError("non-finite metric")
    return C, I, D


def _run_point(config, T, R, snr_db, workers, grid):
    point = {"T": T, "R": R, "P": config.P, "snr_db": snr_db}
    fingerprint = config.fingerprint(T, R, snr_db)
    geometry = make_ula(T, config.d_over_lambda * C0 / config.f, config.f)
    layout = random_layout(R, config.sector, config.seed)
    channel = dataclasses.replace(config.channel, seed=config.seed, P=config.P)
    ensemble = generate_ensemble(channel, geometry, layout, config.element, config.sector, workers=workers)
    omega = 2.0 * R  # unit power per beam
    noise = NoiseModel.from_snr_db(snr_db, omega)
    integrator = PatternIntegrator(geometry, config.element, grid, config.sector)
    rx = layout.positions

    synth = {}
    if "zf" in config.methods:
        synth["zf"] = lambda G: zf_excitation_set(G, omega)
    if "iso" in config.methods:
        synth["iso"] = lambda G: iso_excitation_set(geometry, rx, omega)
    if "hcs" in config.methods:
        hcs = HcsSynthesizer(geometry, config.element, config.sector, grid, integrator)
        synth["hcs"] = lambda G: hcs.synthesize(G, rx, omega)

    mats = ensemble.matrices
    excitations = {m: [None] * config.P for m in config.methods}
    tau = {m: np.zeros(config.P) for m in config.methods}
    clock = time.perf_counter
    for m in config.methods:
        # untimed warm-up so first-call overheads do not land on scenario 0
        try:
            synth[m](mats[0])
        except HcsError as exc:
            raise SweepPointError(point, m, 0, exc) from exc
    if "hcs" in synth:
        # the per-layout ISO work is then paid inside the timed loop, once per point
        hcs.clear_cache()
    # methods interleaved per scenario so that machine load hits all of them alike
    gc_was_enabled = gc.isenabled()
    for p in range(config.P):
        for m in config.methods:
            gc.disable()
            try:
                t0 = clock()
                W = synth[m](mats[p])
                tau[m][p] = clock() - t0
            except HcsError as exc:
                raise SweepPointError(point, m, p, exc) from exc
            finally:
                if gc_was_enabled:
                    gc.enable()
            excitations[m][p] = W

    reports = []
    for m in config.methods:

        def one(p, m=m):
            try:
                return _beam_metrics(integrator, noise, mats[p], excitations[m][p])
            except (HcsError, FloatingPointError) as exc:
                raise SweepPointError(point, m, p, exc) from exc

        if workers > 1 and config.P > 1:
            with ThreadPoolExecutor(workers) as pool:
                rows = list(pool.map(one, range(config.P)))
        else:
            rows = [one(p) for p in range(config.P)]
        C = np.stack([r[0] for r in rows])  # (P, 2R)
        I = np.stack([r[1] for r in rows])
        D_db = to_db(np.stack([r[2] for r in rows]))
        per_scenario_I = I.sum(axis=1)
        I_beam = I.mean(axis=0)
        reports.append(
            MetricsReport(
                method=m.upper(),
                fingerprint=fingerprint,
                C_ave=float(C.sum(axis=1).mean()),
                I_ave_db=float(to_db(per_scenario_I.mean())),
                I_mean_db=float(to_db(I_beam.mean())),
                D_ave_db=float(D_db.mean()),
                tau_s=float(tau[m].mean()),
                C_beam=C.mean(axis=0),
                I_beam_db=to_db(I_beam),
                D_beam_db=D_db.mean(axis=0),
                point=dict(point),
            )
        )
    return reports


def run_experiment(config, workers=None):
    """
    Run every sweep point and method of ``config``.

    Parameters
    ----------
    config : ExperimentConfig
    workers : int, optional
        Threads for channel generation and metric evaluation; defaults to
        :func:`worker_count`. Synthesis always runs on the calling thread so
        that timings are not distorted by contention. Results other than
        ``tau_s`` do not depend on this value.

    Returns
    -------
    list of MetricsReport
        Ordered by sweep point, then by method as listed in the config.

    Raises
    ------
    SweepPointError
        When synthesis or a metric fails; the original error is chained.
    """
    workers = worker_count() if workers is None else max(1, int(workers))
    grid = AngularGrid.midpoint(*config.grid)
    reports = []
    for T, R, snr_db in config.points():
        reports.extend(_run_point(config, T, R, snr_db, workers, grid))
    return reports


def _beam_path(path):
    path = Path(path)
    return path.with_name(path.stem + "_beams" + (path.suffix or ".csv"))


def emit_csv(reports, path):
    """
    Write ``path`` (one row per point and method) and its ``*_beams.csv`` companion.

    ``I_ave_db`` is the scenario average of the summed per-beam ratios;
    ``I_mean_db`` is the per-beam mean, 10 log10(2R) dB lower. Numbers
    carry 9 significant digits. Returns both paths.
    """
    if not reports:
        raise InvalidParam("no reports to write")
    path = Path(path)
    beam_path = _beam_path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(CSV_FIELDS)
            for rep in reports:
                pt = rep.point
                out.writerow(
                    [
                        rep.fingerprint,
                        pt.get("T", ""),
                        pt.get("R", ""),
                        pt.get("P", ""),
                        _fmt(pt["snr_db"]) if "snr_db" in pt else "",
                        rep.method,
                        _fmt(rep.C_ave),
                        _fmt(rep.I_ave_db),
                        _fmt(rep.I_mean_db),
                        _fmt(rep.D_ave_db),
                        _fmt(rep.tau_s),
                    ]
                )
        with open(beam_path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(BEAM_FIELDS)
            for rep in reports:
                for b in range(len(rep.C_beam)):
                    out.writerow(
                        [
                            rep.fingerprint,
                            rep.method,
                            b // 2,
                            b % 2,
                            _fmt(rep.C_beam[b]),
                            _fmt(rep.I_beam_db[b]),
                            _fmt(rep.D_beam_db[b]),
                        ]
                    )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc
    return path, beam_path


def read_csv(path):
    """Parse a metrics CSV written by :func:`emit_csv` into a list of dicts."""
    ints = {"T", "R", "P"}
    floats = {"snr_db", "C_ave", "I_ave_db", "I_mean_db", "D_ave_db", "tau_s"}
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {k: int(v) if k in ints else float(v) if k in floats else v for k, v in row.items()}
            )
    return rows


def summary_table(reports):
    """Fixed-width text table of the ensemble metrics."""
    head = f"{'T':>4} {'R':>3} {'SNR':>5} {'method':<6} {'C_ave':>10} {'I_ave':>8} {'I_beam':>8} {'D_ave':>7} {'tau_ms':>8}"
    lines = [head, "-" * len(head)]
    for rep in reports:
        pt = rep.point
        lines.append(
            f"{pt['T']:>4} {pt['R']:>3} {pt['snr_db']:>5.1f} {rep.method:<6} {rep.C_ave:>10.2f} "
            f"{rep.I_ave_db:>8.2f} {rep.I_mean_db:>8.2f} {rep.D_ave_db:>7.2f} {rep.tau_s * 1e3:>8.3f}"
        )
    return "\n".join(lines)
