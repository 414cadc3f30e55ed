"""Command-line front end.

Every run is a pure function of its RunConfig, which is embedded in each
output file; ``schrscale replay REPORT`` re-executes it.

Exit codes: 0 ok, 1 usage error, 2 divergent where finite is required,
3 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import box_count_dimension, strong_diff_verdict, weak_residual
from .errors import DomainRequired, SchrScaleError
from .evolution import MultiplierSpec, apply_extension, evolve, extension_bound_check, synthesize
from .spectral_model import ModelKind, SpectrumModel
from .state_space import (
    SCALE_LEVELS,
    classify,
    has_finite_mean_energy,
    in_domain,
    inverse_energy_mean,
    mean_energy,
    normalize,
    parse_state_spec,
    renormalize,
    scale_norm,
    spectral_window,
)
from .trajectories import (
    equivariance_statistic,
    integrate_bohmian,
    sample_initial_positions,
    sample_nelson,
)

COMMANDS = ("classify", "norms", "evolve", "weak-check", "strong-check", "extension", "trajectories", "fractal")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    model: dict
    state: str
    params: dict = field(default_factory=dict)
    seed: int = 0
    tol: float = 1e-10

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        return cls(d["command"], dict(d["model"]), d["state"], dict(d.get("params", {})), d.get("seed", 0), d.get("tol", 1e-10))


# -- parsing helpers --------------------------------------------------------


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _modes(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        a, _, b = part.partition("-")
        out.extend(range(int(a), int(b) + 1) if b else [int(a)])
    return out


def parse_multiplier(text: str) -> MultiplierSpec:
    kind, _, body = text.partition(":")
    kind = kind.strip().lower()
    if kind == "zero":
        return MultiplierSpec("zero")
    if kind == "sine":
        kv = dict(p.split("=", 1) for p in body.split(",") if p)
        return MultiplierSpec("sine", alpha=float(kv.get("alpha", 1.0)))
    if kind == "clamp":
        kv = dict(p.split("=", 1) for p in body.split(",") if p)
        return MultiplierSpec("clamp", cap=float(kv["cap"]))
    if kind == "table":
        rows = []
        for row in body.split(";"):
            rng, _, value = row.partition("=")
            lo, _, hi = rng.partition("~")
            rows.append((float(lo), float(hi), float(value)))
        return MultiplierSpec("table", table=tuple(rows))
    raise UsageError(f"unknown multiplier {text!r}")


def build_model(spec: dict) -> SpectrumModel:
    kind = spec["kind"]
    if kind == "box":
        return SpectrumModel.box(spec.get("length", math.pi), spec.get("requested_shift", 0.0))
    if kind == "oscillator":
        return SpectrumModel.oscillator(spec.get("requested_shift", 0.5))
    if kind == "table":
        return SpectrumModel.from_table(spec["table"], spec.get("requested_shift", 0.0))
    raise UsageError(f"unknown model {kind!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="schrscale", description="Hilbert-scale workbench for Schrodinger dynamics.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--model", choices=["box", "oscillator", "table"], default="box")
        sp.add_argument("--length", type=float, default=math.pi, help="box length L")
        sp.add_argument("--shift", type=float, default=None, help="requested spectral shift")
        sp.add_argument("--table", default=None, help="table spectrum 'n:E,n:E,...'")
        sp.add_argument("--state", required=True, help="e.g. 'powerlaw:s=2,n0=1,phase=zero'")
        sp.add_argument("--output", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--config", default=None, help="key=value file; flags override it")

    for name in COMMANDS:
        sp = sub.add_parser(name)
        common(sp)
        if name in ("evolve", "weak-check", "strong-check", "extension", "fractal"):
            sp.add_argument("--t", type=float, default=0.0)
        if name in ("evolve", "fractal"):
            sp.add_argument("--N", type=int, required=True, help="synthesis truncation index")
            sp.add_argument("--points", type=int, default=4097)
        if name == "fractal":
            sp.add_argument("--scales", default="0.25,0.0625,0.015625,0.00390625,0.0009765625")
        if name == "weak-check":
            sp.add_argument("--modes", default="1-50")
            sp.add_argument("--h", default="1e-2,5e-3,2.5e-3")
        if name == "strong-check":
            sp.add_argument("--h", default=None, help="decreasing steps, default 1e-1..1e-4")
        if name == "extension":
            sp.add_argument("--multiplier", default="zero", help="zero | sine:alpha=1 | clamp:cap=2 | table:lo~hi=v;...")
        if name == "trajectories":
            sp.add_argument("--kind", choices=["bohmian", "nelson"], default="nelson")
            sp.add_argument("--paths", type=int, default=1000)
            sp.add_argument("--t-final", type=float, default=0.3)
            sp.add_argument("--dt", type=float, default=1e-3)
            sp.add_argument("--n-out", type=int, default=11)
            sp.add_argument("--window", default=None, help="'a,b': keep a < E_n <= b, renormalize")
            sp.add_argument("--truncation", type=int, default=None)

    rp = sub.add_parser("replay", help="re-run the RunConfig embedded in a report")
    rp.add_argument("report")
    rp.add_argument("--output", default=".")
    return p


def _expand_config(argv: list[str]) -> list[str]:
    """Insert key=value pairs from --config right after the subcommand."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    extra = []
    for line in Path(argv[i + 1]).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            key, _, value = line.partition("=")
            extra += [f"--{key.strip().replace('_', '-')}", value.strip()]
    return argv[:1] + extra + argv[1:]


_COMMON = {"model", "length", "shift", "table", "state", "output", "seed", "tol", "config", "command"}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    model = {"kind": ns.model}
    if ns.model == "box":
        model["length"] = ns.length
        model["requested_shift"] = ns.shift if ns.shift is not None else 0.0
    elif ns.model == "oscillator":
        model["requested_shift"] = ns.shift if ns.shift is not None else 0.5
    else:
        if not ns.table:
            raise UsageError("--model table needs --table")
        model["table"] = [[int(a), float(b)] for a, b in (p.split(":") for p in ns.table.split(","))]
        model["requested_shift"] = ns.shift if ns.shift is not None else 0.0
    params = {k.replace("_", "-"): v for k, v in vars(ns).items() if k not in _COMMON}
    return RunConfig(ns.command, model, ns.state, params, ns.seed, ns.tol)


# -- execution --------------------------------------------------------------


def _sanitize(obj):
    if isinstance(obj, dict):
        return {str(k): _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, config: RunConfig, writer) -> None:
    tmp = path.with_name(f".{path.name}.body")
    writer(tmp)
    body = tmp.read_text()
    tmp.unlink()
    header = "# config: " + json.dumps(_sanitize(asdict(config)), sort_keys=True) + "\n"
    _atomic_write(path, header + body)


def _norm(res) -> dict:
    return res.to_dict()


def execute(config: RunConfig, outdir: Path) -> tuple[dict, str]:
    """Run one configuration; returns (result dict, one-line summary)."""
    model = build_model(config.model)
    state = normalize(parse_state_spec(config.state), model, config.tol)
    p, cmd, tol = config.params, config.command, config.tol
    result: dict = {"state": config.state, "norm_sq_bracket": list(state.norm_sq)}

    if cmd == "classify":
        k = classify(state)
        result.update(
            k_star=k,
            in_domain=in_domain(state),
            finite_mean_energy=has_finite_mean_energy(state),
            mean_energy=_norm(mean_energy(state, tol)),
        )
        summary = f"k*={k} in_domain={k == 2} finite_mean_energy={k >= 1}"
    elif cmd == "norms":
        norms = {str(k): _norm(scale_norm(state, k, tol)) for k in SCALE_LEVELS}
        result.update(norms_sq=norms, inverse_energy_mean=_norm(inverse_energy_mean(state, tol)), k_star=classify(state))
        summary = "||f||_k^2: " + ", ".join(
            f"k={k}:{v['hi']:.6g}" if v["finite"] else f"k={k}:divergent" for k, v in norms.items()
        )
    elif cmd == "evolve":
        grid = _grid(model, p["points"])
        samples = synthesize(state, p["t"], grid, p["N"])
        _write_csv(outdir / "samples.csv", config, samples.to_csv)
        dx = np.diff(grid)
        mass = float(np.sum(0.5 * (samples.density[1:] + samples.density[:-1]) * dx))
        result.update(t=p["t"], N=p["N"], l2_error_bound=samples.l2_error_bound,
                      quadrature_norm_sq=mass, norm_sq_after=list(evolve(state, p["t"]).norm_sq), samples="samples.csv")
        summary = f"synthesized {grid.size} points at t={p['t']} with N={p['N']}; ||psi||^2 by quadrature {mass:.6f}"
    elif cmd == "weak-check":
        hs = _floats(p["h"])
        rows = []
        for n in _modes(p["modes"]):
            res = [weak_residual(state, n, p["t"], h) for h in hs]
            ratios = [a / b if b > 0 else None for a, b in zip(res, res[1:])]
            rows.append({"n": n, "residuals": res, "ratios": ratios})
        result.update(t=p["t"], h=hs, modes=rows)
        summary = f"weak residuals for {len(rows)} modes at h={hs}"
    elif cmd == "strong-check":
        kwargs = {"h_sequence": _floats(p["h"])} if p.get("h") else {}
        verdict = strong_diff_verdict(state, p["t"], **kwargs)
        result.update(verdict.to_dict())
        summary = f"strong differentiability: {verdict.verdict} (slope {verdict.slope:.4g}, k*={verdict.k_star})"
    elif cmd == "extension":
        u = parse_multiplier(p["multiplier"])
        ext = apply_extension(state, u, p["t"])
        lhs, rhs = extension_bound_check(state, u, p["t"])
        result.update(
            multiplier=u.describe(), t=p["t"], M=ext.bound, norm_sq=_norm(ext.norm_sq),
            exactly_zero=ext.is_exactly_zero(), lhs=lhs, rhs=rhs, bound_holds=lhs <= rhs + 1e-12,
        )
        summary = f"||S psi^u||^2 <= {lhs:.6g} vs M||psi||^2 = {rhs:.6g}"
    elif cmd == "trajectories":
        if p.get("window"):
            a, b = _floats(p["window"])
            state = renormalize(spectral_window(state, a, b), tol)
        if classify(state) < 2:
            raise DomainRequired("state not in D(H): window it first")
        span = (0.0, p["t-final"])
        if p["kind"] == "bohmian":
            x0 = sample_initial_positions(state, p["paths"], config.seed, truncation=p.get("truncation"))
            ens = integrate_bohmian(state, x0, span, p["dt"], p["n-out"], truncation=p.get("truncation"))
        else:
            ens = sample_nelson(state, p["paths"], span, p["dt"], config.seed, p["n-out"], truncation=p.get("truncation"))
        ks = [[float(t), equivariance_statistic(ens, state, float(t))] for t in ens.times]
        _write_csv(outdir / "ensemble.csv", config, ens.to_csv)
        result.update(
            kind=ens.kind, dt=ens.dt, seed=ens.seed, paths=int(ens.positions.shape[0]), ks=ks,
            node_guard_hits=ens.node_guard_hits, breached_paths=int(ens.breached.sum()),
            breach_fraction=ens.breach_fraction, crossings=ens.crossings, ensemble="ensemble.csv",
        )
        summary = f"{ens.kind}: {ens.positions.shape[0]} paths, final KS {ks[-1][1]:.4g}, breaches {int(ens.breached.sum())}"
    elif cmd == "fractal":
        grid = _grid(model, p["points"])
        samples = synthesize(state, p["t"], grid, p["N"])
        bc = box_count_dimension(samples, _floats(p["scales"]))
        result.update(dimension=bc.dimension, fit_residual=bc.fit_residual, scales=list(bc.scales),
                      counts=list(bc.counts), l2_error_bound=samples.l2_error_bound)
        summary = f"box-counting dimension {bc.dimension:.4f} (fit rms {bc.fit_residual:.3g})"
    else:
        raise UsageError(f"unknown command {cmd!r}")

    resolved = asdict(config)
    resolved["model"] = {**config.model, "resolved": model.describe()}
    report = {"schrscale_version": __version__, "config": resolved, "result": result}
    _atomic_write(outdir / "report.json", json.dumps(_sanitize(report), indent=2, sort_keys=True) + "\n")
    return result, summary


def _grid(model: SpectrumModel, points: int) -> np.ndarray:
    if model.kind is ModelKind.BOX:
        return np.linspace(0.0, model.length, points)
    if model.kind is ModelKind.OSCILLATOR:
        return np.linspace(-10.0, 10.0, points)
    raise UsageError("table models carry no eigenfunctions")


def load_config(report_path) -> RunConfig:
    cfg = json.loads(Path(report_path).read_text())["config"]
    cfg["model"] = {k: v for k, v in cfg["model"].items() if k != "resolved"}
    return RunConfig.from_dict(cfg)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(_expand_config(argv))
    except OSError as exc:
        print(f"schrscale: cannot read config: {exc}", file=sys.stderr)
        return 3
    except SystemExit as exc:
        return int(exc.code or 0)
    outdir = Path(ns.output)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
        config = load_config(ns.report) if ns.command == "replay" else config_from_args(ns)
    except OSError as exc:
        print(f"schrscale: {exc}", file=sys.stderr)
        return 3
    except (UsageError, KeyError, ValueError) as exc:
        print(f"schrscale: {exc}", file=sys.stderr)
        return 1
    try:
        _, summary = execute(config, outdir)
    except DomainRequired as exc:
        print(f"schrscale: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"schrscale: I/O failure: {exc}", file=sys.stderr)
        return 3
    except (UsageError, SchrScaleError, ValueError, KeyError, IndexError) as exc:
        print(f"schrscale: {exc}", file=sys.stderr)
        return 1
    print(summary)
    return 0


if __name__ == "__main__":
    sys.exit(main())
