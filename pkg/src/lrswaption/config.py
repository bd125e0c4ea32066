"""Run configuration: a JSON file with ``model``, ``trade``, ``solver``, ``pricing`` and ``output`` blocks.

Unknown keys are rejected with their dotted path so that typos fail loudly
instead of silently falling back to defaults.
"""

from __future__ import annotations

import csv
import hashlib
import json
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from .american import SolverConfig
from .bermudan import LatticeSpec
from .calibration import CurveQuote, SwaptionQuote, fit_alpha, fit_sigma
from .errors import ConfigurationError
from .lsm import LSMConfig
from .model import ModelParams, PiecewiseConstant, SwapSpec, invert_swap_rate, strike_admissible

STYLES = ("european", "bermudan", "american", "lsm", "all")
EXERCISE_SETS = ("payment", "weekly", "european")
FORMATS = ("json", "csv")
MAX_SEED = 2**64 - 1


@dataclass(frozen=True)
class ModelBlock:
    kappa: float = 0.03
    theta: float = 2.55
    x0: float | None = None
    swaprate0: float | None = None  # forward swap rate at time 0, used when x0 is absent
    alpha: Any = 0.0765  # number or {"knots": [...], "values": [...]}
    sigma: Any = 0.5
    curve_file: str | None = None
    quote_file: str | None = None


@dataclass(frozen=True)
class TradeBlock:
    t0: float = 1.0
    delta: float = 0.5
    n: int = 4
    strike: float = 0.05
    notional: float = 1.0
    side: str = "payer"


@dataclass(frozen=True)
class SolverBlock:
    n_steps: int = 200
    root_tol: float = 1e-8
    quad_tol: float = 1e-12
    method: str = "auto"
    x_upper: float | None = None
    pre_t0_nodes: int = 400
    n_x: int = 2806
    x_max: float | None = None
    lsm_paths: int = 100_000
    lsm_substeps: int = 8
    lsm_degree: int = 3
    seed: int = 0


@dataclass(frozen=True)
class PricingBlock:
    style: str = "american"
    t: float = 0.0
    x: float | None = None
    swaprate: float | None = None
    exercise: Any = "payment"  # "payment", "weekly", "european" or a list of dates
    exercise_per_year: float = 52.0
    ordering_tol: float = 2e-4


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    formats: tuple = ("json", "csv")


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock = field(default_factory=ModelBlock)
    trade: TradeBlock = field(default_factory=TradeBlock)
    solver: SolverBlock = field(default_factory=SolverBlock)
    pricing: PricingBlock = field(default_factory=PricingBlock)
    output: OutputBlock = field(default_factory=OutputBlock)
    base_dir: Path = field(default=Path("."), compare=False)
    digest: str = field(default="", compare=False)

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d.pop("digest")
        d["output"]["formats"] = list(d["output"]["formats"])
        return d

    def resolve(self, name: str | None) -> Path | None:
        if name is None:
            return None
        p = Path(name)
        return p if p.is_absolute() else self.base_dir / p


_BLOCKS = {"model": ModelBlock, "trade": TradeBlock, "solver": SolverBlock,
           "pricing": PricingBlock, "output": OutputBlock}

_NUMBER = (int, float)


def _check_type(value, annotation: str, path: str):
    """Coerce ``value`` to the field annotation (``float``, ``int``, ``str``, optionally ``| None``)."""
    kind, _, optional = annotation.partition(" | ")
    if value is None:
        if optional == "None":
            return None
        raise ConfigurationError("must not be null", path=path)
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, _NUMBER):
            raise ConfigurationError("expected a number", path=path)
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError("expected an integer", path=path)
        return value
    if kind == "str" and not isinstance(value, str):
        raise ConfigurationError("expected a string", path=path)
    if kind == "tuple":
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigurationError("expected a list of strings", path=path)
        return tuple(value)
    return value


def _block(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigurationError("expected an object", path=path)
    known = {f.name: f for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigurationError("unknown key", path=f"{path}.{key}")
    return cls(**{k: _check_type(v, str(known[k].type), f"{path}.{k}") for k, v in data.items()})


def _curve_spec(value, path) -> PiecewiseConstant:
    if isinstance(value, _NUMBER) and not isinstance(value, bool):
        return PiecewiseConstant.constant(float(value))
    if isinstance(value, dict):
        extra = set(value) - {"knots", "values"}
        if extra:
            raise ConfigurationError("unknown key", path=f"{path}.{sorted(extra)[0]}")
        try:
            return PiecewiseConstant(tuple(map(float, value["knots"])), tuple(map(float, value["values"])))
        except KeyError as exc:
            raise ConfigurationError(f"missing {exc.args[0]!r}", path=path) from None
        except (TypeError, ValueError) as exc:
            raise ConfigurationError(str(exc), path=path) from None
    raise ConfigurationError("expected a number or {knots, values}", path=path)


def parse_config(data: dict, base_dir: Path = Path("."), digest: str = "") -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("top level must be an object", path="config")
    for key in data:
        if key not in _BLOCKS:
            raise ConfigurationError("unknown block", path=key)
    blocks = {k: _block(cls, data.get(k, {}), k) for k, cls in _BLOCKS.items()}
    cfg = RunConfig(**blocks, base_dir=Path(base_dir), digest=digest)
    validate(cfg)
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    raw = path.read_bytes()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON ({exc.msg} at line {exc.lineno})", path=str(path)) from None
    return parse_config(data, path.parent, hashlib.sha256(raw).hexdigest())


def validate(cfg: RunConfig) -> None:
    """Cheap checks that must pass before any numerics run."""
    m, tr, s, p, o = cfg.model, cfg.trade, cfg.solver, cfg.pricing, cfg.output
    if (m.x0 is None) == (m.swaprate0 is None):
        raise ConfigurationError("give exactly one of x0 and swaprate0", path="model.x0")
    if m.curve_file is None:
        _curve_spec(m.alpha, "model.alpha")
    if m.quote_file is None:
        _curve_spec(m.sigma, "model.sigma")
    spec = trade_spec(cfg)
    if s.n_steps < 2 * tr.n:
        raise ConfigurationError(f"need at least 2n = {2 * tr.n} steps", path="solver.n_steps")
    solver_config(cfg)
    lattice_spec(cfg)
    lsm_config(cfg)
    if not 0 <= s.seed <= MAX_SEED:
        raise ConfigurationError("seed must be an unsigned 64-bit integer", path="solver.seed")
    if p.style not in STYLES:
        raise ConfigurationError(f"style must be one of {STYLES}", path="pricing.style")
    if p.x is not None and p.swaprate is not None:
        raise ConfigurationError("give x or swaprate, not both", path="pricing.x")
    if p.x is not None and not p.x > 0:
        raise ConfigurationError("factor value must be positive", path="pricing.x")
    if not p.t >= 0:
        raise ConfigurationError("pricing time must be nonnegative", path="pricing.t")
    if isinstance(p.exercise, str):
        if p.exercise not in EXERCISE_SETS:
            raise ConfigurationError(f"exercise must be one of {EXERCISE_SETS} or a list",
                                     path="pricing.exercise")
    elif isinstance(p.exercise, list):
        if not p.exercise or not all(isinstance(d, _NUMBER) for d in p.exercise):
            raise ConfigurationError("expected a nonempty list of dates", path="pricing.exercise")
        if min(p.exercise) < spec.t0 or max(p.exercise) > spec.tn + 1e-12:
            raise ConfigurationError("exercise dates must lie in [T_0, T_n]", path="pricing.exercise")
    else:
        raise ConfigurationError("expected a string or a list", path="pricing.exercise")
    bad = set(o.formats) - set(FORMATS)
    if bad:
        raise ConfigurationError(f"unknown format {sorted(bad)[0]!r}", path="output.formats")
    # alpha is known without calibration, so admissibility can be checked now
    if m.curve_file is None:
        alpha = _curve_spec(m.alpha, "model.alpha")
        probe = ModelParams(m.kappa, m.theta, alpha, 0.0, m.x0 or 1.0)
        if not strike_admissible(probe, tr.strike, tr.side):
            raise ConfigurationError(
                f"strike {tr.strike} violates the admissibility bound for a {tr.side} swaption "
                "(payer K <= inf alpha + kappa, receiver K >= sup alpha - kappa*theta)",
                path="trade.strike")


@contextmanager
def _prefixed(block: str, rename: dict | None = None):
    """Re-raise configuration errors from the numerical modules with the block name in the path."""
    try:
        yield
    except ConfigurationError as exc:
        if exc.path and exc.path.startswith(block + "."):
            raise
        message = str(exc).split(": ", 1)[-1] if exc.path else str(exc)
        leaf = exc.path.rsplit(".", 1)[-1] if exc.path else None
        leaf = (rename or {}).get(leaf, leaf)
        raise ConfigurationError(message, path=f"{block}.{leaf}" if leaf else block) from None


def trade_spec(cfg: RunConfig, side: str | None = None) -> SwapSpec:
    tr = cfg.trade
    with _prefixed("trade"):
        return SwapSpec(tr.t0, tr.delta, tr.n, tr.strike, tr.notional, side or tr.side)


def solver_config(cfg: RunConfig) -> SolverConfig:
    s = cfg.solver
    with _prefixed("solver"):
        return SolverConfig(n_steps=s.n_steps, root_tol=s.root_tol, method=s.method, quad_tol=s.quad_tol,
                            x_upper=s.x_upper, pre_t0_nodes=s.pre_t0_nodes)


def lattice_spec(cfg: RunConfig) -> LatticeSpec:
    s = cfg.solver
    with _prefixed("solver"):
        return LatticeSpec(n_x=s.n_x, x_max=s.x_max, method=s.method, tol=s.quad_tol)


def lsm_config(cfg: RunConfig, seed: int | None = None) -> LSMConfig:
    s = cfg.solver
    with _prefixed("solver", {"n_paths": "lsm_paths", "lsm": "lsm_substeps"}):
        return LSMConfig(n_paths=s.lsm_paths, exercise_per_year=cfg.pricing.exercise_per_year,
                         substeps=s.lsm_substeps, degree=s.lsm_degree,
                         seed=s.seed if seed is None else seed)


def _read_csv(path: Path, columns: tuple[str, ...]) -> list[dict]:
    if not path.is_file():
        raise FileNotFoundError(f"input file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigurationError("no rows", path=str(path))
    missing = set(columns) - set(rows[0])
    if missing:
        raise ConfigurationError(f"missing column {sorted(missing)[0]!r}", path=str(path))
    return rows


def _num(row, key, path, line):
    try:
        return float(row[key])
    except (TypeError, ValueError):
        raise ConfigurationError(f"line {line}: not a number: {row[key]!r}", path=f"{path.name}.{key}") from None


def read_curve(path: Path) -> list[CurveQuote]:
    rows = _read_csv(path, ("maturity", "discount_factor"))
    out = []
    for i, r in enumerate(rows):
        try:
            out.append(CurveQuote(_num(r, "maturity", path, i + 2), _num(r, "discount_factor", path, i + 2)))
        except ConfigurationError as exc:
            field_name = (exc.path or "").rsplit(".", 1)[-1]
            raise ConfigurationError(f"line {i + 2}: {str(exc).split(': ', 1)[-1]}",
                                     path=f"{path.name}.{field_name}") from None
    return out


def read_swaptions(path: Path, delta: float) -> list[SwaptionQuote]:
    rows = _read_csv(path, ("expiry", "tenor", "strike", "side", "price"))
    quotes = []
    for i, r in enumerate(rows):
        line = i + 2
        qid = r.get("id") or f"line {line}"
        try:
            quotes.append(SwaptionQuote(_num(r, "expiry", path, line), _num(r, "tenor", path, line),
                                        _num(r, "strike", path, line), r["side"].strip(),
                                        _num(r, "price", path, line), delta=delta, quote_id=qid))
        except ConfigurationError as exc:
            field_name = (exc.path or "").rsplit(".", 1)[-1]
            raise ConfigurationError(f"quote {qid}: {str(exc).split(': ', 1)[-1]}",
                                     path=f"{path.name}.{field_name}") from None
    return quotes


def file_digest(path: Path | None) -> str | None:
    return None if path is None else hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass(frozen=True)
class ResolvedModel:
    params: ModelParams
    curve: list = field(default_factory=list)
    quotes: list = field(default_factory=list)


def resolve_model(cfg: RunConfig) -> ResolvedModel:
    """Model parameters, running the alpha and sigma fits when quote files are given."""
    m, tr = cfg.model, cfg.trade
    curve_path, quote_path = cfg.resolve(m.curve_file), cfg.resolve(m.quote_file)
    # read (and validate) every input before fitting anything
    curve = read_curve(curve_path) if curve_path else []
    quotes = read_swaptions(quote_path, tr.delta) if quote_path else []
    x0 = m.x0
    alpha = fit_alpha(m.kappa, m.theta, x0 if x0 is not None else 1.0, curve) if curve else \
        _curve_spec(m.alpha, "model.alpha")
    sigma = _curve_spec(m.sigma, "model.sigma") if not quotes else PiecewiseConstant.constant(0.0)
    if x0 is None and m.swaprate0 is not None:
        if curve:
            raise ConfigurationError("swaprate0 cannot be combined with a curve file", path="model.swaprate0")
        probe = ModelParams(m.kappa, m.theta, alpha, sigma, 1.0)
        x0 = invert_swap_rate(probe, trade_spec(cfg), 0.0, m.swaprate0)
    if x0 is None:
        raise ConfigurationError("give x0 or swaprate0", path="model.x0")
    with _prefixed("model"):
        params = ModelParams(m.kappa, m.theta, alpha, sigma, x0)
    if not strike_admissible(params, tr.strike, tr.side):
        raise ConfigurationError(f"strike {tr.strike} violates the admissibility bound for a "
                                 f"{tr.side} swaption", path="trade.strike")
    if quotes:
        params = params.replace(sigma=fit_sigma(params, quotes, cfg.solver.method))
    return ResolvedModel(params, curve, quotes)
