"""Run configuration, single runs, experiment grids and result files.

A run directory contains::

    config.yaml        resolved configuration (every default written out)
    trace.csv          epoch, loss, phase
    field_approx.csv   x, y, re, im of the trained model on the physical square
    field_ref.csv      x, y, re, im of the reference on the same points
    result.csv         one ResultRow

A grid directory holds one run directory per configuration plus
``results.csv`` and ``table.md``.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import itertools
import json
import logging
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .decomposition import grid_decomposition, init_fbpinn
from .diffnet import Architecture
from .loss import SAMPLERS, PmlLoss, SourceSpec, sample_collocation, source
from .metrics import eval_grid, evaluate_model
from .models import init_pinn
from .oracle import (ComplexGridField, Grid, default_grid_points, interpolate,
                     reference_solution, write_field_csv)
from .optimizers import KINDS, OptimizerConfig, train
from .pml import PmlConfig
from .problem import HelmholtzProblem, pml_width_from_lambda

log = logging.getLogger(__name__)

METHODS = ("pinn", "fbpinn")
DEFAULT_ARCH = {"pinn": (3, 32), "fbpinn": (3, 16)}
DEFAULT_EPOCHS = {"adam": 5000, "lbfgs": 5000, "adam_then_lbfgs": 5000, "engd": 500}


class ConfigError(ValueError):
    pass


# -- configuration ----------------------------------------------------------

@dataclass(frozen=True)
class ProblemSection:
    k: float = 0.57
    L: float = 5.0
    c: float = 1.0


@dataclass(frozen=True)
class PmlSection:
    width_in_lambdas: float = 1.0
    sigma0: float = 2.0


@dataclass(frozen=True)
class ArchitectureSection:
    # None picks the per-method default (3x32 for pinn, 3x16 for fbpinn)
    hidden_layers: int | None = None
    hidden_width: int | None = None
    omega0: float | str = "auto"
    normalize_inputs: bool = True


@dataclass(frozen=True)
class DecompositionSection:
    grid: tuple = (2, 2)
    overlap: float = 1.5


@dataclass(frozen=True)
class SamplingSection:
    n_points: int = 5000
    sampler: str = "uniform_random"


@dataclass(frozen=True)
class OptimizerSection:
    kind: str = "adam_then_lbfgs"
    total_epochs: int | None = None
    learning_rate: float = 1e-3
    switch_ratio: float = 0.7
    lbfgs_history: int = 50
    engd_damping: float | None = None
    engd_line_search: str = "backtracking"
    engd_learning_rate: float = 1.0


@dataclass(frozen=True)
class CurriculumSection:
    enabled: bool = True
    switch_fraction: float = 0.1
    amplitude: float = 0.1


@dataclass(frozen=True)
class OracleSection:
    points_per_wavelength: float = 60.0
    minimum_points: int = 256
    eval_points: int = 201
    field_points: int = 101
    cache_dir: str | None = None


@dataclass(frozen=True)
class RunConfig:
    method: str = "pinn"
    seed: int = 0
    name: str | None = None
    output_dir: str = "runs"
    problem: ProblemSection = field(default_factory=ProblemSection)
    pml: PmlSection = field(default_factory=PmlSection)
    architecture: ArchitectureSection = field(default_factory=ArchitectureSection)
    decomposition: DecompositionSection = field(default_factory=DecompositionSection)
    sampling: SamplingSection = field(default_factory=SamplingSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    curriculum: CurriculumSection = field(default_factory=CurriculumSection)
    oracle: OracleSection = field(default_factory=OracleSection)

    def __post_init__(self):
        validate(self)

    # derived quantities -------------------------------------------------
    @property
    def helmholtz(self) -> HelmholtzProblem:
        p = self.problem
        return HelmholtzProblem(p.k, p.L, p.c)

    @property
    def pml_config(self) -> PmlConfig:
        width = pml_width_from_lambda(self.helmholtz, self.pml.width_in_lambdas)
        return PmlConfig(self.problem.L, width, self.pml.sigma0, self.problem.k)

    @property
    def run_name(self) -> str:
        if self.name:
            return self.name
        return (f"{self.method}-{self.optimizer.kind}-k{self.problem.k:g}"
                f"-w{self.pml.width_in_lambdas:g}-s{self.seed}")

    def resolved(self) -> "RunConfig":
        """Copy with every ``None``/``auto`` default replaced by its value."""
        layers, width = DEFAULT_ARCH[self.method]
        arch = self.architecture
        arch = dataclasses.replace(
            arch,
            hidden_layers=arch.hidden_layers or layers,
            hidden_width=arch.hidden_width or width,
            omega0=auto_omega0(self) if arch.omega0 == "auto" else float(arch.omega0))
        opt = self.optimizer
        if opt.total_epochs is None:
            opt = dataclasses.replace(opt, total_epochs=DEFAULT_EPOCHS[opt.kind])
        return dataclasses.replace(self, architecture=arch, optimizer=opt, name=self.run_name)

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_dict(cls, data: dict | None) -> "RunConfig":
        return _build(cls, data or {}, "config")

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        if data is not None and not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_yaml(Path(path).read_text())

    def with_overrides(self, **dotted) -> "RunConfig":
        """``cfg.with_overrides(**{"problem.k": 1.59})``."""
        data = self.to_dict()
        for key, value in dotted.items():
            node = data
            *head, last = key.split(".")
            for part in head:
                if not isinstance(node.get(part), dict):
                    raise ConfigError(f"unknown config section {part!r} in {key!r}")
                node = node[part]
            if last not in node:
                raise ConfigError(f"unknown config key {key!r}")
            node[last] = value
        return RunConfig.from_dict(data)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")
    kwargs = {}
    for name, value in data.items():
        default = fields[name].default_factory if fields[name].default_factory is not \
            dataclasses.MISSING else None
        if default is not None and dataclasses.is_dataclass(default):
            kwargs[name] = _build(default, value or {}, f"{where}.{name}")
        elif name == "grid":
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _check(cond, msg):
    if not cond:
        raise ConfigError(msg)


def _is_number(v):
    return isinstance(v, (int, float, np.number)) and not isinstance(v, bool)


def validate(cfg: RunConfig) -> None:
    _check(cfg.method in METHODS, f"method must be one of {METHODS}")
    _check(isinstance(cfg.seed, int) and not isinstance(cfg.seed, bool) and cfg.seed >= 0,
           "seed must be a non-negative integer")
    p = cfg.problem
    for name in ("k", "L", "c"):
        v = getattr(p, name)
        _check(_is_number(v) and v > 0, f"problem.{name} must be a positive number")
    _check(_is_number(cfg.pml.width_in_lambdas) and cfg.pml.width_in_lambdas > 0,
           "pml.width_in_lambdas must be positive")
    _check(_is_number(cfg.pml.sigma0) and cfg.pml.sigma0 >= 0, "pml.sigma0 must be >= 0")
    a = cfg.architecture
    for name in ("hidden_layers", "hidden_width"):
        v = getattr(a, name)
        _check(v is None or (isinstance(v, int) and v >= 1),
               f"architecture.{name} must be a positive integer or null")
    _check(a.omega0 == "auto" or (_is_number(a.omega0) and a.omega0 > 0),
           "architecture.omega0 must be 'auto' or a positive number")
    d = cfg.decomposition
    _check(len(d.grid) == 2 and all(isinstance(g, int) and g >= 1 for g in d.grid),
           "decomposition.grid must be two positive integers")
    _check(_is_number(d.overlap) and d.overlap > 1.0, "decomposition.overlap must exceed 1")
    s = cfg.sampling
    _check(isinstance(s.n_points, int) and s.n_points >= 1, "sampling.n_points must be >= 1")
    _check(s.sampler in SAMPLERS, f"sampling.sampler must be one of {SAMPLERS}")
    o = cfg.optimizer
    _check(o.kind in KINDS, f"optimizer.kind must be one of {KINDS}")
    _check(o.total_epochs is None or (isinstance(o.total_epochs, int) and o.total_epochs >= 0),
           "optimizer.total_epochs must be a non-negative integer or null")
    try:
        OptimizerConfig(o.kind, o.learning_rate, o.total_epochs or 0, o.switch_ratio,
                        o.lbfgs_history, o.engd_damping, o.engd_line_search,
                        o.engd_learning_rate)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"optimizer: {exc}") from exc
    c = cfg.curriculum
    _check(0 <= c.switch_fraction <= 1, "curriculum.switch_fraction must lie in [0, 1]")
    r = cfg.oracle
    _check(r.points_per_wavelength > 0 and r.minimum_points >= 3,
           "oracle grid settings must be positive")
    _check(r.eval_points >= 2 and r.field_points >= 2, "oracle evaluation grids need >= 2 points")


def auto_omega0(cfg: RunConfig) -> float:
    """``k`` times the half-width of the box each network sees as ``[-1, 1]``.

    With this choice the first layer, fed normalised inputs, starts out with
    spatial frequencies up to about ``k / 2`` in physical units.
    """
    if not cfg.architecture.normalize_inputs:
        return 1.0
    pml = cfg.pml_config
    if cfg.method == "pinn":
        scale = pml.half_width
    else:
        dec = grid_decomposition(pml.half_width, tuple(cfg.decomposition.grid),
                                 cfg.decomposition.overlap)
        scale = float(np.max(dec.half_widths))
    return float(cfg.problem.k * scale)


def expand_seeds(master: int) -> dict:
    """Independent child seeds for initialisation and collocation sampling."""
    init, sampler = np.random.SeedSequence(master).generate_state(2)
    return {"init": int(init), "sampler": int(sampler)}


# -- oracle cache -----------------------------------------------------------

def _cache_dir(cfg: RunConfig, fallback: Path) -> Path:
    if cfg.oracle.cache_dir:
        return Path(cfg.oracle.cache_dir)
    env = os.environ.get("HELMPINN_ORACLE_CACHE")
    return Path(env) if env else fallback / ".oracle_cache"


def oracle_key(cfg: RunConfig) -> dict:
    pml = cfg.pml_config
    n = default_grid_points(pml, cfg.oracle.points_per_wavelength, cfg.oracle.minimum_points)
    return {"k": pml.k, "L": pml.L, "L_pml": pml.L_pml, "sigma0": pml.sigma0, "n": n}


def _key_digest(key: dict) -> str:
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()[:20]


def compute_reference(cfg: RunConfig) -> ComplexGridField:
    key = oracle_key(cfg)
    spec = SourceSpec(cfg.problem.k)
    return reference_solution(cfg.pml_config, lambda q: source(q, spec), key["n"])


def cached_reference(cfg: RunConfig, cache_dir) -> ComplexGridField:
    """Reference field for ``cfg``, computed once per key and stored as ``.npz``.

    Files are published with an atomic rename, so concurrent runs either see
    a complete file or compute their own copy.
    """
    key = oracle_key(cfg)
    cache_dir = Path(cache_dir)
    path = cache_dir / f"oracle-{_key_digest(key)}.npz"
    if path.exists():
        with np.load(path) as data:
            grid = Grid(*[v.item() for v in data["grid"][:2].astype(int)],
                        *data["grid"][2:].tolist())
            return ComplexGridField(grid, data["re"], data["im"])
    field_ = compute_reference(cfg)
    cache_dir.mkdir(parents=True, exist_ok=True)
    g = field_.grid
    fd, tmp = tempfile.mkstemp(dir=cache_dir, suffix=".npz.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, re=field_.re, im=field_.im, key=json.dumps(key, sort_keys=True),
                     grid=np.array([g.nx, g.ny, g.x0, g.x1, g.y0, g.y1], dtype=np.float64))
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)
    return field_


# -- single runs ------------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    name: str
    method: str
    optimizer: str
    k: float
    width_in_lambdas: float
    L_pml: float
    sigma0: float
    seed: int
    n_points: int
    omega0: float
    epochs: int
    rel_l2_real: float
    rel_l2_imag: float
    final_loss: float
    wall_time: float
    time_adam: float
    time_lbfgs: float
    time_engd: float
    diverged: bool
    status: str
    message: str = ""


RESULT_COLUMNS = tuple(f.name for f in dataclasses.fields(ResultRow))


def build_model(cfg: RunConfig, seed: int):
    cfg = cfg.resolved()
    a = cfg.architecture
    arch = Architecture(a.hidden_layers, a.hidden_width)
    half = cfg.pml_config.half_width
    if cfg.method == "pinn":
        return init_pinn(arch, half, seed, a.omega0, a.normalize_inputs)
    dec = grid_decomposition(half, tuple(cfg.decomposition.grid), cfg.decomposition.overlap)
    return init_fbpinn(dec, arch, seed, a.omega0, a.normalize_inputs)


def build_loss(cfg: RunConfig, seed: int) -> PmlLoss:
    cfg = cfg.resolved()
    pml = cfg.pml_config
    colloc = sample_collocation(cfg.sampling.n_points, pml.half_width,
                                cfg.sampling.sampler, seed)
    c = cfg.curriculum
    if c.enabled:
        switch = int(np.floor(c.switch_fraction * cfg.optimizer.total_epochs))
        spec = SourceSpec(pml.k, "curriculum_imag", switch, c.amplitude)
    else:
        spec = SourceSpec(pml.k)
    return PmlLoss(colloc, spec, pml)


def optimizer_config(cfg: RunConfig) -> OptimizerConfig:
    o = cfg.resolved().optimizer
    return OptimizerConfig(o.kind, o.learning_rate, o.total_epochs, o.switch_ratio,
                           o.lbfgs_history, o.engd_damping, o.engd_line_search,
                           o.engd_learning_rate)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return v


def write_results(path, rows) -> None:
    _write_csv(Path(path), RESULT_COLUMNS,
               [[_fmt(getattr(r, c)) for c in RESULT_COLUMNS] for r in rows])


def read_results(path) -> list[ResultRow]:
    types = {f.name: f.type for f in dataclasses.fields(ResultRow)}
    out = []
    with Path(path).open(newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for k, v in rec.items():
                t = types[k]
                if t == "bool":
                    kw[k] = v == "true"
                elif t == "int":
                    kw[k] = int(v)
                elif t == "float":
                    kw[k] = float(v)
                else:
                    kw[k] = v
            out.append(ResultRow(**kw))
    return out


def run_single(config: RunConfig, out_dir=None, cache_dir=None, callback=None) -> ResultRow:
    """Train one configuration, evaluate it and write its run directory.

    ``out_dir`` defaults to ``config.output_dir / config.run_name``.  A
    diverged run still produces every file; its row has ``diverged`` set.
    """
    cfg = config.resolved()
    run_dir = Path(out_dir) if out_dir is not None else Path(cfg.output_dir) / cfg.name
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.yaml").write_text(cfg.to_yaml())
    seeds = expand_seeds(cfg.seed)
    pml = cfg.pml_config

    cache = Path(cache_dir) if cache_dir is not None else _cache_dir(cfg, run_dir.parent)
    reference = cached_reference(cfg, cache)

    model = build_model(cfg, seeds["init"])
    loss = build_loss(cfg, seeds["sampler"])
    t0 = time.perf_counter()
    # overflow is reported through trace.diverged, not as warnings
    with np.errstate(over="ignore", invalid="ignore"):
        trained, trace = train(model, loss, optimizer_config(cfg), cfg.seed, callback)
    wall = time.perf_counter() - t0

    _write_csv(run_dir / "trace.csv", ["epoch", "loss", "phase"],
               [[e, repr(f), p] for e, (f, p) in enumerate(zip(trace.losses, trace.phases))])

    pts = eval_grid(pml.L, cfg.oracle.field_points)
    ref_vals = interpolate(reference, pts)
    write_field_csv(run_dir / "field_ref.csv", pts[:, 0], pts[:, 1], ref_vals)
    message = ""
    try:
        with np.errstate(all="ignore"):
            u = trained.jet(pts).value
        approx = u[:, 0] + 1j * u[:, 1]
        report = evaluate_model(trained, reference, pml.L, cfg.oracle.eval_points)
        errs = (report.rel_l2_real, report.rel_l2_imag)
    except (ValueError, FloatingPointError) as exc:
        approx = np.full(len(pts), np.nan + 1j * np.nan)
        errs = (float("nan"), float("nan"))
        message = str(exc)
    write_field_csv(run_dir / "field_approx.csv", pts[:, 0], pts[:, 1], approx)
    diverged = trace.diverged or not all(np.isfinite(errs))
    if diverged and not message:
        message = "training diverged"
    if trace.stalled and not message:
        message = "L-BFGS line search stalled"
    times = trace.phase_times()
    row = ResultRow(
        name=cfg.name, method=cfg.method, optimizer=cfg.optimizer.kind, k=float(pml.k),
        width_in_lambdas=float(cfg.pml.width_in_lambdas), L_pml=float(pml.L_pml),
        sigma0=float(pml.sigma0), seed=cfg.seed, n_points=cfg.sampling.n_points,
        omega0=float(cfg.architecture.omega0), epochs=len(trace),
        rel_l2_real=float(errs[0]), rel_l2_imag=float(errs[1]),
        final_loss=float(trace.final_loss), wall_time=wall,
        time_adam=times.get("adam", 0.0), time_lbfgs=times.get("lbfgs", 0.0),
        time_engd=times.get("engd", 0.0), diverged=bool(diverged),
        status="diverged" if diverged else "ok", message=message)
    write_results(run_dir / "result.csv", [row])
    return row


# -- grids ------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    base: RunConfig = field(default_factory=RunConfig)
    methods: tuple = ("pinn", "fbpinn")
    optimizers: tuple = ("adam_then_lbfgs", "engd")
    ks: tuple = (0.57, 1.59, 4.51)
    widths: tuple = (0.25, 0.5, 1.0)
    seeds: tuple = (0,)
    epochs: dict = field(default_factory=dict)

    def configs(self) -> list[RunConfig]:
        out = []
        for k, w, opt, method, seed in itertools.product(
                self.ks, self.widths, self.optimizers, self.methods, self.seeds):
            over = {"problem.k": k, "pml.width_in_lambdas": w, "optimizer.kind": opt,
                    "method": method, "seed": seed, "name": None}
            if opt in self.epochs:
                over["optimizer.total_epochs"] = self.epochs[opt]
            out.append(self.base.with_overrides(**over))
        return out

    def to_dict(self) -> dict:
        return {"base": self.base.to_dict(), "methods": list(self.methods),
                "optimizers": list(self.optimizers), "ks": list(self.ks),
                "widths": list(self.widths), "seeds": list(self.seeds),
                "epochs": dict(self.epochs)}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        data = dict(data or {})
        unknown = set(data) - {"base", "methods", "optimizers", "ks", "widths", "seeds",
                               "epochs", "preset"}
        if unknown:
            raise ConfigError(f"unknown grid key(s): {', '.join(sorted(unknown))}")
        start = preset(data.pop("preset")) if "preset" in data else cls()
        base = RunConfig.from_dict(data.pop("base")) if "base" in data else start.base
        kw = {k: tuple(v) if k != "epochs" else dict(v) for k, v in data.items()}
        return dataclasses.replace(start, base=base, **kw)


def _preset_paper_tables() -> GridSpec:
    return GridSpec()


def _preset_smoke() -> GridSpec:
    base = RunConfig().with_overrides(**{"sampling.n_points": 1000})
    return GridSpec(base=base, ks=(0.57,), widths=(1.0,),
                    epochs={"adam_then_lbfgs": 300, "engd": 15})


PRESETS = {"paper-tables": _preset_paper_tables, "smoke": _preset_smoke}


def preset(name: str) -> GridSpec:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def config_hash(configs) -> str:
    """sha256 of the canonical JSON of resolved configurations."""
    blob = json.dumps([c.resolved().to_dict() for c in configs], sort_keys=True,
                      separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _failed_row(cfg: RunConfig, exc: BaseException) -> ResultRow:
    cfg = cfg.resolved()
    nan = float("nan")
    return ResultRow(cfg.name, cfg.method, cfg.optimizer.kind, float(cfg.problem.k),
                     float(cfg.pml.width_in_lambdas), float(cfg.pml_config.L_pml),
                     float(cfg.pml.sigma0), cfg.seed, cfg.sampling.n_points,
                     float(cfg.architecture.omega0), 0, nan, nan, nan, 0.0, 0.0, 0.0, 0.0,
                     False, "failed", f"{type(exc).__name__}: {exc}")


def _grid_worker(args):
    cfg, out_dir, cache_dir = args
    try:
        return run_single(cfg, out_dir, cache_dir)
    except Exception as exc:  # one failing run must not stop the grid
        log.exception("run %s failed", cfg.run_name)
        return _failed_row(cfg, exc)


def run_grid(spec: GridSpec | list, output_dir, workers: int = 1) -> list[ResultRow]:
    """Run every configuration of ``spec`` and write ``results.csv`` and ``table.md``.

    Rows come back in configuration order regardless of ``workers``.
    """
    configs = spec.configs() if isinstance(spec, GridSpec) else list(spec)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    cache = out / ".oracle_cache"
    jobs = [(c, out / c.run_name, _cache_dir(c, out) if c.oracle.cache_dir else cache)
            for c in configs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_grid_worker, jobs))
    else:
        rows = [_grid_worker(j) for j in jobs]
    write_results(out / "results.csv", rows)
    (out / "table.md").write_text(format_table(rows))
    return rows


def format_table(rows) -> str:
    """Markdown tables of real/imag relative errors, one per optimizer.

    Rows are (k, PML width), columns are methods.
    """
    if not rows:
        return "(no runs)\n"
    lines = []
    methods = [m for m in METHODS if any(r.method == m for r in rows)]
    for opt in sorted({r.optimizer for r in rows}):
        sub = [r for r in rows if r.optimizer == opt]
        lines.append(f"### {opt}")
        lines.append("")
        lines.append("| k | L_pml / lambda | " + " | ".join(methods) + " |")
        lines.append("|---|---|" + "---|" * len(methods))
        keys = sorted({(r.k, r.width_in_lambdas) for r in sub})
        for k, w in keys:
            cells = []
            for m in methods:
                hit = [r for r in sub if r.method == m and r.k == k and r.width_in_lambdas == w]
                if not hit:
                    cells.append("")
                    continue
                r = hit[0]
                cell = f"{r.rel_l2_real:.1e} / {r.rel_l2_imag:.1e}"
                if r.status != "ok":
                    cell += f" ({r.status})"
                cells.append(cell)
            lines.append(f"| {k:g} | {w:g} | " + " | ".join(cells) + " |")
        lines.append("")
    lines.append("Cells show relative L2 error of the real / imaginary part on the physical domain.")
    return "\n".join(lines) + "\n"
