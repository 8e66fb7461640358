"""Command-line entry point.

Examples::

    bapc drag --noise gaussian --sigma 2 --seed 7 --out runs/drag
    bapc newsvendor --corrector rf --delta 0.1 --repeats 100 --seed 7 --out runs/nv
    bapc criteria-sweep --eta 0.5 --radii 0.1:2.0:0.1 --seed 7 --out runs/sweep

Settings may also come from a JSON file given with ``--config``; flags win
over file values. Exit status is 0 on success, 2 on invalid input and 1 on
any other failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from bapc.errors import ValidationError

log = logging.getLogger("bapc")

EXPERIMENTS = ("drag", "newsvendor", "criteria-sweep")
CORRECTOR_NAMES = {"rf": "random_forest", "random_forest": "random_forest", "mlp": "mlp", "nnet": "mlp"}


@dataclass
class RunConfig:
    experiment: str
    seed: int = 0
    out: str = "bapc-out"
    noise: str = "none"
    sigma: float = 0.0
    allow_extrapolation: bool = False
    corrector: str = "random_forest"
    delta: float = 0.1
    repeats: int = 100
    n: int = 200
    delta_grid: list = field(default_factory=lambda: [0.0, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4])
    eta: list = field(default_factory=lambda: [1.0])
    radii: list = field(default_factory=list)

    def as_dict(self) -> dict:
        """Settings that affect this experiment."""
        keep = {
            "drag": {"noise", "sigma", "allow_extrapolation", "eta", "radii"},
            "criteria-sweep": {"noise", "sigma", "allow_extrapolation", "eta", "radii"},
            "newsvendor": {"corrector", "delta", "repeats", "n", "delta_grid"},
        }[self.experiment] | {"experiment", "seed", "out"}
        return {k: v for k, v in asdict(self).items() if k in keep}


CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def parse_range(text: str) -> list[float]:
    """``"start:stop:step"`` (inclusive) or a comma-separated list."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            k = int(round((stop - start) / step))
            return [round(start + i * step, 12) for i in range(k + 1)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse range {text!r}; use start:stop:step or a comma list") from None


def _defaults_for(experiment: str) -> dict:
    d = {}
    if experiment == "criteria-sweep":
        d.update(noise="gaussian", sigma=2.0, eta=[1.0, 0.75, 0.5, 0.3, 0.1])
    if experiment in ("drag", "criteria-sweep"):
        d["radii"] = parse_range("0.1:2.0:0.1")
    return d


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return data


def _coerce(values: dict) -> dict:
    out = dict(values)
    for key in ("radii", "delta_grid", "eta"):
        if key in out and isinstance(out[key], (str, int, float)):
            out[key] = parse_range(str(out[key]))
    if "corrector" in out:
        name = str(out["corrector"])
        if name not in CORRECTOR_NAMES:
            raise ValidationError(f"unknown corrector {name!r}")
        out["corrector"] = CORRECTOR_NAMES[name]
    return out


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.experiment not in EXPERIMENTS:
        raise ValidationError(f"unknown experiment {cfg.experiment!r}")
    if not isinstance(cfg.seed, int) or not 0 <= cfg.seed < 2**64:
        raise ValidationError("seed must be a 64-bit unsigned integer")
    if cfg.noise not in ("none", "gaussian", "uniform"):
        raise ValidationError(f"unknown noise kind {cfg.noise!r}")
    if cfg.experiment in ("drag", "criteria-sweep"):
        if cfg.noise == "none":
            cfg.sigma = 0.0
        elif cfg.sigma not in (1.0, 2.0, 3.0) and not cfg.allow_extrapolation:
            raise ValidationError(f"sigma={cfg.sigma:g} is outside {{1, 2, 3}}; pass --allow-extrapolation to use it")
        elif not cfg.sigma > 0:
            raise ValidationError("sigma must be positive for noisy data")
        if not cfg.radii or any(r <= 0 for r in cfg.radii) or sorted(set(cfg.radii)) != list(cfg.radii):
            raise ValidationError("radii must be positive and strictly ascending")
    if any(not 0 < e <= 1 for e in cfg.eta) or not cfg.eta:
        raise ValidationError("eta values must lie in (0, 1]")
    if cfg.experiment == "newsvendor":
        if cfg.delta < 0 or any(d < 0 for d in cfg.delta_grid):
            raise ValidationError("delta must be nonnegative")
        if cfg.repeats < 1:
            raise ValidationError("repeats must be positive")
        if cfg.n < 4 or cfg.n % 4:
            raise ValidationError("n must be a positive multiple of 4")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bapc", description="Parameter-shift explanations of AI corrections.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="experiment", required=True)

    def common(p):
        # defaults are None so that explicitly given flags can be told apart
        p.add_argument("--config", help="JSON file with settings; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")

    drag = sub.add_parser("drag", help="falling body with air drag")
    common(drag)
    drag.add_argument("--noise", choices=["none", "gaussian", "uniform"])
    drag.add_argument("--sigma", type=float)
    drag.add_argument("--allow-extrapolation", action="store_true", default=None)
    drag.add_argument("--radii")

    nv = sub.add_parser("newsvendor", help="risk-affine newsvendor parameter shift")
    common(nv)
    nv.add_argument("--corrector", choices=sorted(CORRECTOR_NAMES))
    nv.add_argument("--delta", type=float)
    nv.add_argument("--repeats", type=int)
    nv.add_argument("--n", type=int, help="records per generated dataset (both folds)")
    nv.add_argument("--delta-grid", dest="delta_grid")

    sweep = sub.add_parser("criteria-sweep", help="accuracy/fidelity slacks over radii and eta")
    common(sweep)
    sweep.add_argument("--eta")
    sweep.add_argument("--radii")
    sweep.add_argument("--noise", choices=["none", "gaussian", "uniform"])
    sweep.add_argument("--sigma", type=float)
    sweep.add_argument("--allow-extrapolation", action="store_true", default=None)
    return parser


def parse_config(argv=None) -> RunConfig:
    """Resolve defaults, then the config file, then explicit flags."""
    args = build_parser().parse_args(argv)
    values = {"experiment": args.experiment, **_defaults_for(args.experiment)}
    file_values = _coerce(load_config_file(args.config)) if args.config else {}
    if file_values.get("experiment", args.experiment) != args.experiment:
        raise ValidationError("config file names a different experiment")
    values.update(file_values)
    flags = {
        k: v
        for k, v in vars(args).items()
        if v is not None and k in CONFIG_KEYS and k != "experiment"
    }
    flags = _coerce(flags)
    for k, v in flags.items():
        if k in file_values and file_values[k] != v:
            log.warning("flag --%s=%s overrides config file value %r", k.replace("_", "-"), v, file_values[k])
    values.update(flags)
    return validate(RunConfig(**values))


# --------------------------------------------------------------------------
# Runners
# --------------------------------------------------------------------------


def run_drag_cmd(cfg: RunConfig):
    from bapc.drag import NoiseSpec, radius_sweep, run_drag, SweepTable, INTERVALS
    from bapc.outputs import emit_drag

    noise = NoiseSpec(cfg.noise, cfg.sigma)
    run = run_drag(noise, cfg.seed)
    ds = run.data.dataset
    fit = run.results["I1"].fit
    tables = []
    for eta in cfg.eta:
        rows = radius_sweep(cfg.radii, [1.0], ds, fit, run.corrector, eta, eta, eval_nbhd=INTERVALS[0].nbhd)
        tables.append(SweepTable(noise, eta, rows, {}))
    return emit_drag(run, tables, cfg.out, cfg.as_dict(), cfg.seed)


def run_sweep_cmd(cfg: RunConfig):
    from bapc.drag import NoiseSpec, run_criteria_sweep
    from bapc.outputs import emit_criteria_sweep

    noise = NoiseSpec(cfg.noise, cfg.sigma)
    runs = {}
    tables = run_criteria_sweep([noise], cfg.eta, cfg.radii, cfg.seed, runs=runs)
    return emit_criteria_sweep(runs, tables, cfg.out, cfg.as_dict(), cfg.seed)


def run_newsvendor_cmd(cfg: RunConfig):
    from bapc.newsvendor import NewsvendorConfig, generate_newsvendor_dataset, monte_carlo_cv, one_repeat
    from bapc.outputs import emit_newsvendor
    from bapc.streams import substream

    nv = NewsvendorConfig(n=cfg.n, delta=cfg.delta, mc_repeats=cfg.repeats, seed=cfg.seed)
    months = generate_newsvendor_dataset(nv, substream(cfg.seed, "demand", 0))
    example = one_repeat(nv, cfg.corrector, 0)
    mc = monte_carlo_cv(nv, cfg.corrector)
    curve = [mc if d == cfg.delta else monte_carlo_cv(nv, cfg.corrector, d) for d in cfg.delta_grid]
    return emit_newsvendor(months, example, mc, curve, cfg.out, cfg.as_dict(), cfg.seed, nv.p, nv.c)


RUNNERS = {"drag": run_drag_cmd, "newsvendor": run_newsvendor_cmd, "criteria-sweep": run_sweep_cmd}


def main(argv=None) -> int:
    raw = sys.argv[1:] if argv is None else list(argv)
    verbose = "-v" in raw or "--verbose" in raw
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
    except ValidationError as exc:
        print(f"bapc: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0)
    try:
        paths = RUNNERS[cfg.experiment](cfg)
    except ValidationError as exc:
        print(f"bapc: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report and exit non-zero
        log.exception("run failed")
        print(f"bapc: runtime error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
