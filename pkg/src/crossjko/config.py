"""Run configuration: YAML schema, validation and round-trip serialization.

A configuration document has the top-level blocks ``grid``, ``time``,
``model``, ``initial``, ``solver``, ``fv``, ``diagnostics`` and
``output``; only ``grid`` and ``time`` are required.  See the README for
the full key list.  Errors carry the offending key path and the line of
the document where it appears.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import yaml

from .errors import RangeError, SchemaError
from .grid import Grid1D, SpeciesPair
from .jko import JkoConfig
from .model import DIFFUSION_PRESETS, MODEL_PRESETS, DiffusionSpec, ModelSpec, PotentialSpec, PowerTerm, SumPowerTerm, model_preset

INITIAL_KINDS = ("coupled", "barenblatt", "bump", "gaussian", "uniform")
KERNEL_FORMS = ("zero", "quadratic", "gaussian", "abs")
KERNEL_KINDS = {"H1": "self_H1", "H2": "self_H2", "K1": "cross_K1", "K2": "cross_K2"}
FORMATS = ("csv", "json")


@dataclass
class GridBlock:
    x_min: float
    x_max: float
    n_cells: int


@dataclass
class TimeBlock:
    tau: float
    horizon_T: float


@dataclass
class DiffusionBlock:
    """Either a named family with parameters or an explicit term table."""

    preset: str | None = None
    params: dict = field(default_factory=dict)
    m1: float | None = None
    m2: float | None = None
    C1: float | None = None
    alpha1: float | None = None
    alpha2: float | None = None
    terms: tuple = ()


@dataclass
class KernelBlock:
    form: str = "zero"
    coef: float = 0.0
    width: float = 1.0


@dataclass
class ModelBlock:
    preset: str | None = "zero"
    diffusion: DiffusionBlock | None = None
    kernels: dict = field(default_factory=dict)


@dataclass
class InitialBlock:
    kind: str = "coupled"
    t0: float = 0.1
    centers: tuple = (-0.4, 0.5)
    widths: tuple = (0.9, 1.1)
    intervals: tuple = ()


@dataclass
class SolverBlock:
    inner_tol: float = 1e-9
    max_inner_iters: int = 400
    n_q: int | None = None
    step_shrink: float = 0.5
    step_grow: float = 2.0
    max_sweeps: int = 20
    check_boundary: bool = True


@dataclass
class FvBlock:
    dt_fv: float | None = None
    limiter: bool = False
    safety: float = 0.9
    l1_tol: float = 0.03


@dataclass
class DiagnosticsBlock:
    checks: tuple = ("conservation", "scheme_inequality", "dissipation", "moment_inequality", "holder", "norm_bounds", "entropy_bounds", "flow_interchange")
    s_max: float = 1e-4
    n_heat_steps: int = 1
    holder_pairs: int = 100
    calibration: bool = False
    oracle: str = "auto"
    oracle_tol: float = 0.05


@dataclass
class OutputBlock:
    directory: str = "out"
    formats: tuple = FORMATS


@dataclass
class RunConfig:
    grid: GridBlock
    time: TimeBlock
    model: ModelBlock = field(default_factory=ModelBlock)
    initial: InitialBlock = field(default_factory=InitialBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    fv: FvBlock = field(default_factory=FvBlock)
    diagnostics: DiagnosticsBlock = field(default_factory=DiagnosticsBlock)
    output: OutputBlock = field(default_factory=OutputBlock)

    @property
    def jko(self) -> JkoConfig:
        return JkoConfig(tau=self.time.tau, **asdict(self.solver))


# ------------------------------------------------------------------ parsing


class _Lines:
    """Key path -> 1-based line number, from the composed YAML node tree."""

    def __init__(self, node):
        self.map: dict[tuple, int] = {}
        if node is not None:
            self._walk(node, ())

    def _walk(self, node, path):
        self.map[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (k.value,)
                self.map[key] = k.start_mark.line + 1
                self._walk_child(v, key)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                self._walk_child(v, path + (i,))

    def _walk_child(self, node, path):
        line = self.map.get(path)
        self._walk(node, path)
        if line is not None:
            self.map[path] = line

    def __call__(self, path) -> int | None:
        path = tuple(path)
        while path not in self.map and path:
            path = path[:-1]
        return self.map.get(path)


class _Reader:
    def __init__(self, lines: _Lines):
        self.lines = lines

    def _dotted(self, path):
        return ".".join(str(p) for p in path)

    def schema(self, msg, path):
        return SchemaError(msg, self._dotted(path), self.lines(path))

    def range(self, msg, path):
        return RangeError(msg, self._dotted(path), self.lines(path))

    def mapping(self, data, path, allowed, required=()):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise self.schema("expected a mapping", path)
        for k in data:
            if k not in allowed:
                raise self.schema(f"unknown key; allowed: {', '.join(sorted(allowed))}", path + (k,))
        for k in required:
            if k not in data:
                raise self.schema("missing required key", path + (k,))
        return data

    def number(self, data, key, path, default=None, integer=False, optional=False):
        p = path + (key,)
        if key not in data:
            return default
        v = data[key]
        if v is None and optional:
            return None
        if isinstance(v, bool):
            raise self.schema("expected a number", p)
        if isinstance(v, str):
            # YAML 1.1 reads exponent literals without a dot as strings
            try:
                v = float(v)
            except ValueError:
                raise self.schema("expected a number", p) from None
        if not isinstance(v, (int, float)):
            raise self.schema("expected a number", p)
        if integer:
            if float(v) != int(v):
                raise self.schema("expected an integer", p)
            return int(v)
        v = float(v)
        if not math.isfinite(v):
            raise self.range("must be finite", p)
        return v

    def boolean(self, data, key, path, default):
        if key not in data:
            return default
        v = data[key]
        if not isinstance(v, bool):
            raise self.schema("expected true or false", path + (key,))
        return v

    def string(self, data, key, path, default=None, choices=None, optional=False):
        if key not in data:
            return default
        v = data[key]
        if v is None and optional:
            return None
        if not isinstance(v, str):
            raise self.schema("expected a string", path + (key,))
        if choices is not None and v not in choices:
            raise self.schema(f"unknown value {v!r}; choose from {', '.join(choices)}", path + (key,))
        return v

    def numbers(self, data, key, path, default, length=None):
        if key not in data:
            return default
        v = data[key]
        if not isinstance(v, list) or (length is not None and len(v) != length):
            raise self.schema(f"expected a list of {length} numbers" if length else "expected a list", path + (key,))
        return tuple(self.number({i: x for i, x in enumerate(v)}, i, path + (key,)) for i in range(len(v)))


def _check_exponents(rd: _Reader, m1, m2, a1, a2, path, keys):
    for m, key in ((m1, keys[0]), (m2, keys[1])):
        if m is not None and not m > 1.0:
            raise rd.range(f"{key}={m} violates D1: the exponents must exceed 1", path + (key,))
    for a, m, key in ((a1, m1, "alpha1"), (a2, m2, "alpha2")):
        if a is None or m is None:
            continue
        if a >= 3.0 * m:
            raise rd.range(f"{key}={a} violates alpha_i < M_i = 3 m_i = {3.0 * m} (exclusive upper bound)", path + (key,))
        if a < m:
            raise rd.range(f"{key}={a} must be at least m_i = {m}", path + (key,))


def _parse_diffusion(rd: _Reader, data, path) -> DiffusionBlock:
    d = rd.mapping(data, path, {"preset", "params", "m1", "m2", "C1", "alpha1", "alpha2", "terms"})
    blk = DiffusionBlock()
    blk.preset = rd.string(d, "preset", path, None, choices=tuple(DIFFUSION_PRESETS))
    params = d.get("params") or {}
    if not isinstance(params, dict):
        raise rd.schema("expected a mapping", path + ("params",))
    blk.params = {k: rd.number(params, k, path + ("params",)) for k in params}
    for key in ("m1", "m2", "C1", "alpha1", "alpha2"):
        setattr(blk, key, rd.number(d, key, path, None, optional=True))
    terms = d.get("terms") or []
    if not isinstance(terms, list):
        raise rd.schema("expected a list of terms", path + ("terms",))
    out = []
    for i, t in enumerate(terms):
        tp = path + ("terms", i)
        t = rd.mapping(t, tp, {"coef", "p", "q", "sum_power"}, required=("coef",))
        if "sum_power" in t:
            if "p" in t or "q" in t:
                raise rd.schema("a term has either p/q or sum_power", tp)
            out.append({"coef": rd.number(t, "coef", tp), "sum_power": rd.number(t, "sum_power", tp)})
        else:
            out.append({"coef": rd.number(t, "coef", tp), "p": rd.number(t, "p", tp, 0.0), "q": rd.number(t, "q", tp, 0.0)})
    blk.terms = tuple(out)
    if blk.preset is None and not blk.terms:
        raise rd.schema("give either a preset or a term table", path)
    if blk.preset is not None and blk.terms:
        raise rd.schema("preset and term table are exclusive", path + ("terms",))
    p = blk.params
    if "m" in p:
        _check_exponents(rd, p["m"], p["m"], None, None, path + ("params",), ("m", "m"))
    _check_exponents(rd, p.get("m1"), p.get("m2"), None, None, path + ("params",), ("m1", "m2"))
    if "alpha" in p and "m" in p and not p["m"] <= p["alpha"] < 3 * p["m"]:
        raise rd.range(f"alpha={p['alpha']} violates alpha_i < M_i = 3 m_i = {3 * p['m']} (exclusive upper bound)", path + ("params", "alpha"))
    _check_exponents(rd, blk.m1, blk.m2, None, None, path, ("m1", "m2"))
    m1 = blk.m1 if blk.m1 is not None else 2.0
    m2 = blk.m2 if blk.m2 is not None else 2.0
    if blk.preset is None:
        _check_exponents(rd, m1, m2, blk.alpha1, blk.alpha2, path, ("m1", "m2"))
    return blk


def _parse_model(rd: _Reader, data, path) -> ModelBlock:
    d = rd.mapping(data, path, {"preset", "diffusion", "kernels"})
    blk = ModelBlock()
    blk.preset = rd.string(d, "preset", path, "zero", choices=MODEL_PRESETS, optional=True)
    if d.get("diffusion") is not None:
        blk.diffusion = _parse_diffusion(rd, d["diffusion"], path + ("diffusion",))
    ks = rd.mapping(d.get("kernels"), path + ("kernels",), set(KERNEL_KINDS))
    kernels = {}
    for name in sorted(ks):
        kp = path + ("kernels", name)
        k = rd.mapping(ks[name], kp, {"form", "coef", "width"})
        kb = KernelBlock(rd.string(k, "form", kp, "zero", choices=KERNEL_FORMS), rd.number(k, "coef", kp, 0.0), rd.number(k, "width", kp, 1.0))
        if kb.form == "gaussian" and not kb.width > 0:
            raise rd.range("gaussian width must be positive", kp + ("width",))
        kernels[name] = kb
    blk.kernels = kernels
    if blk.preset is None and blk.diffusion is None and not kernels:
        raise rd.schema("model needs a preset, a diffusion block or kernels", path)
    return blk


def _parse_initial(rd: _Reader, data, path) -> InitialBlock:
    d = rd.mapping(data, path, {"kind", "t0", "centers", "widths", "intervals"})
    blk = InitialBlock()
    blk.kind = rd.string(d, "kind", path, "coupled", choices=INITIAL_KINDS)
    blk.t0 = rd.number(d, "t0", path, 0.1)
    if not blk.t0 > 0:
        raise rd.range("t0 must be positive", path + ("t0",))
    default_centers = (0.0, 0.0) if blk.kind == "barenblatt" else InitialBlock.centers
    blk.centers = rd.numbers(d, "centers", path, default_centers, length=2)
    blk.widths = rd.numbers(d, "widths", path, InitialBlock.widths, length=2)
    if any(not w > 0 for w in blk.widths):
        raise rd.range("widths must be positive", path + ("widths",))
    if "intervals" in d:
        iv = d["intervals"]
        if not isinstance(iv, list) or len(iv) != 2:
            raise rd.schema("expected two [a, b] intervals", path + ("intervals",))
        blk.intervals = tuple(rd.numbers({"i": x}, "i", path + ("intervals", k), None, length=2) for k, x in enumerate(iv))
        for k, (a, b) in enumerate(blk.intervals):
            if not a < b:
                raise rd.range("interval must have a < b", path + ("intervals", k))
    elif blk.kind == "uniform":
        raise rd.schema("uniform initial data needs intervals", path)
    return blk


def _parse_solver(rd: _Reader, data, path) -> SolverBlock:
    d = rd.mapping(data, path, {f.name for f in fields(SolverBlock)})
    s = SolverBlock()
    s.inner_tol = rd.number(d, "inner_tol", path, s.inner_tol)
    s.max_inner_iters = rd.number(d, "max_inner_iters", path, s.max_inner_iters, integer=True)
    s.n_q = rd.number(d, "n_q", path, None, integer=True, optional=True)
    s.step_shrink = rd.number(d, "step_shrink", path, s.step_shrink)
    s.step_grow = rd.number(d, "step_grow", path, s.step_grow)
    s.max_sweeps = rd.number(d, "max_sweeps", path, s.max_sweeps, integer=True)
    s.check_boundary = rd.boolean(d, "check_boundary", path, s.check_boundary)
    for key, ok, msg in (
        ("inner_tol", s.inner_tol > 0, "must be positive"),
        ("max_inner_iters", s.max_inner_iters >= 1, "must be at least 1"),
        ("step_shrink", 0 < s.step_shrink < 1, "must lie in (0, 1)"),
        ("step_grow", s.step_grow >= 1, "must be at least 1"),
        ("max_sweeps", s.max_sweeps >= 1, "must be at least 1"),
    ):
        if not ok:
            raise rd.range(msg, path + (key,))
    return s


def _parse_fv(rd: _Reader, data, path) -> FvBlock:
    d = rd.mapping(data, path, {f.name for f in fields(FvBlock)})
    b = FvBlock()
    b.dt_fv = rd.number(d, "dt_fv", path, None, optional=True)
    b.limiter = rd.boolean(d, "limiter", path, b.limiter)
    b.safety = rd.number(d, "safety", path, b.safety)
    b.l1_tol = rd.number(d, "l1_tol", path, b.l1_tol)
    if b.dt_fv is not None and not b.dt_fv > 0:
        raise rd.range("must be positive", path + ("dt_fv",))
    if not 0 < b.safety <= 1:
        raise rd.range("must lie in (0, 1]", path + ("safety",))
    return b


def _parse_diagnostics(rd: _Reader, data, path) -> DiagnosticsBlock:
    from .diagnostics import DEFAULT_CHECKS

    d = rd.mapping(data, path, {f.name for f in fields(DiagnosticsBlock)})
    b = DiagnosticsBlock()
    if "checks" in d:
        ch = d["checks"]
        if not isinstance(ch, list):
            raise rd.schema("expected a list of check names", path + ("checks",))
        for i, c in enumerate(ch):
            if c not in DEFAULT_CHECKS:
                raise rd.schema(f"unknown check {c!r}; choose from {', '.join(DEFAULT_CHECKS)}", path + ("checks", i))
        b.checks = tuple(ch)
    b.s_max = rd.number(d, "s_max", path, b.s_max)
    b.n_heat_steps = rd.number(d, "n_heat_steps", path, b.n_heat_steps, integer=True)
    b.holder_pairs = rd.number(d, "holder_pairs", path, b.holder_pairs, integer=True)
    b.calibration = rd.boolean(d, "calibration", path, b.calibration)
    b.oracle = rd.string(d, "oracle", path, b.oracle, choices=("auto", "none", "barenblatt"))
    b.oracle_tol = rd.number(d, "oracle_tol", path, b.oracle_tol)
    for key, ok in (("s_max", b.s_max > 0), ("n_heat_steps", b.n_heat_steps >= 1), ("holder_pairs", b.holder_pairs >= 2), ("oracle_tol", b.oracle_tol > 0)):
        if not ok:
            raise rd.range("must be positive", path + (key,))
    return b


def _parse_output(rd: _Reader, data, path) -> OutputBlock:
    d = rd.mapping(data, path, {"directory", "formats"})
    b = OutputBlock()
    b.directory = rd.string(d, "directory", path, b.directory)
    if "formats" in d:
        fm = d["formats"]
        if not isinstance(fm, list) or any(f not in FORMATS for f in fm):
            raise rd.schema(f"formats must be a list drawn from {', '.join(FORMATS)}", path + ("formats",))
        b.formats = tuple(fm)
    return b


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML configuration document."""
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise SchemaError(f"malformed document: {getattr(exc, 'problem', exc)}", line=None if mark is None else mark.line + 1) from None
    rd = _Reader(_Lines(node))
    top = rd.mapping(data, (), {"grid", "time", "model", "initial", "solver", "fv", "diagnostics", "output"}, required=("grid", "time"))

    g = rd.mapping(top["grid"], ("grid",), {"x_min", "x_max", "n_cells"}, required=("x_min", "x_max", "n_cells"))
    grid = GridBlock(rd.number(g, "x_min", ("grid",)), rd.number(g, "x_max", ("grid",)), rd.number(g, "n_cells", ("grid",), integer=True))
    if not grid.x_min < grid.x_max:
        raise rd.range("x_min must be below x_max", ("grid", "x_max"))
    if grid.n_cells < 8:
        raise rd.range("need at least 8 cells", ("grid", "n_cells"))

    t = rd.mapping(top["time"], ("time",), {"tau", "horizon_T"}, required=("tau", "horizon_T"))
    time = TimeBlock(rd.number(t, "tau", ("time",)), rd.number(t, "horizon_T", ("time",)))
    if not time.tau > 0:
        raise rd.range(f"tau={time.tau} must be positive", ("time", "tau"))
    if time.horizon_T < 0:
        raise rd.range("horizon_T must be nonnegative", ("time", "horizon_T"))

    cfg = RunConfig(
        grid,
        time,
        _parse_model(rd, top.get("model"), ("model",)),
        _parse_initial(rd, top.get("initial"), ("initial",)),
        _parse_solver(rd, top.get("solver"), ("solver",)),
        _parse_fv(rd, top.get("fv"), ("fv",)),
        _parse_diagnostics(rd, top.get("diagnostics"), ("diagnostics",)),
        _parse_output(rd, top.get("output"), ("output",)),
    )
    # building the model surfaces the remaining structural errors with context
    try:
        build_model(cfg)
    except (ValueError, TypeError) as exc:
        raise rd.range(str(exc), ("model",)) from None
    return cfg


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


# ------------------------------------------------------------ serialization


def _plain(obj):
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    return obj


def config_to_dict(cfg: RunConfig) -> dict:
    d = _plain(asdict(cfg))
    m = d["model"]
    if m["diffusion"] is None:
        del m["diffusion"]
    else:
        m["diffusion"] = {k: v for k, v in m["diffusion"].items() if v is not None and v != {} and v != []}
    if not m["kernels"]:
        del m["kernels"]
    ini = d["initial"]
    if not ini["intervals"]:
        del ini["intervals"]
    return d


def serialize_config(cfg: RunConfig) -> str:
    """YAML text that parses back to an equal configuration."""
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False, default_flow_style=None)


# ---------------------------------------------------------------- builders


def build_grid(cfg: RunConfig) -> Grid1D:
    return Grid1D(cfg.grid.x_min, cfg.grid.x_max, cfg.grid.n_cells)


def _build_diffusion(blk: DiffusionBlock) -> DiffusionSpec:
    if blk.preset is not None:
        spec = DIFFUSION_PRESETS[blk.preset](**blk.params)
        over = {k: getattr(blk, k) for k in ("C1", "alpha1", "alpha2") if getattr(blk, k) is not None}
        if over:
            spec = DiffusionSpec(spec.m1, spec.m2, spec.terms, over.get("C1", spec.C1), over.get("alpha1", spec.alpha1), over.get("alpha2", spec.alpha2), spec.name, spec.rho1_max)
        return spec
    terms = tuple(SumPowerTerm(t["coef"], t["sum_power"]) if "sum_power" in t else PowerTerm(t["coef"], t["p"], t["q"]) for t in blk.terms)
    return DiffusionSpec(
        blk.m1 if blk.m1 is not None else 2.0,
        blk.m2 if blk.m2 is not None else 2.0,
        terms,
        C1=blk.C1 if blk.C1 is not None else 0.0,
        alpha1=blk.alpha1,
        alpha2=blk.alpha2,
        name="table",
    )


def build_model(cfg: RunConfig) -> ModelSpec:
    mb = cfg.model
    base = model_preset(mb.preset) if mb.preset is not None else ModelSpec()
    parts = {}
    if mb.diffusion is not None:
        parts["diffusion"] = _build_diffusion(mb.diffusion)
    for name, kb in mb.kernels.items():
        parts[name] = PotentialSpec(KERNEL_KINDS[name], kb.form, kb.coef, kb.width)
    if not parts:
        return base
    fields_ = {f.name: getattr(base, f.name) for f in fields(ModelSpec)}
    fields_.update(parts)
    fields_["name"] = f"{mb.preset or 'custom'}+custom"
    return ModelSpec(**fields_)


def build_initial(cfg: RunConfig, grid: Grid1D | None = None) -> SpeciesPair:
    from . import scenarios as sc

    g = build_grid(cfg) if grid is None else grid
    ini = cfg.initial
    c1, c2 = ini.centers
    w1, w2 = ini.widths
    if ini.kind == "coupled":
        return sc.coupled_initial(g)
    if ini.kind == "barenblatt":
        return sc.barenblatt_pair(g, ini.t0, (c1, c2))
    if ini.kind == "bump":
        return SpeciesPair(sc.bump_density(g, c1, w1), sc.bump_density(g, c2, w2))
    if ini.kind == "gaussian":
        return SpeciesPair(sc.gaussian_density(g, c1, w1), sc.gaussian_density(g, c2, w2))
    (a1, b1), (a2, b2) = ini.intervals
    return SpeciesPair(sc.uniform_density(g, a1, b1), sc.uniform_density(g, a2, b2))
