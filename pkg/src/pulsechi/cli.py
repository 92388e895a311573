"""Command-line front end: points | measure | reconstruct | verify."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import __version__
from . import analytic as an
from . import identities as ids
from . import reconstruct as rc
from .model import OscillatorParams, ProbeAmplitudes
from .states import state_from_dict, state_to_dict

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CONVERGENCE = 3
EXIT_COVERAGE = 4

ENV_OUTPUT = "PULSECHI_OUTPUT_DIR"
ENV_JOBS = "PULSECHI_JOBS"


class ConfigError(ValueError):
    pass


# -- configuration --------------------------------------------------------

SCHEMA = {
    "seed": int,
    "mode": str,
    "jobs": int,
    "oscillator": {"nu": float, "gamma": float, "nbar": float, "g": float},
    "probe": {"psi_plus": "complex", "psi_minus": "complex"},
    "sweep": {
        "families": list,
        "n_max": int,
        "n_values": list,
        "tau_points": int,
        "draws": int,
        "gammas": list,
        "gamma_min": float,
        "gamma_max": float,
        "gamma_points": int,
        "n_caps": list,
    },
    "state": {"kind": str, "alpha": "complex", "n1": int, "n2": int, "c1": "complex", "c2": "complex"},
    "oracle": {"dim": int, "dephasing": float},
    "grid": {"extent": float, "spacing": float, "method": str, "dim": int, "dump_rho": bool},
    "verify": {"dims": list, "tol": float, "keys": list},
    "output": {"dir": str, "prefix": str},
}


@dataclass
class RunConfig:
    oscillator: OscillatorParams = field(default_factory=lambda: OscillatorParams(gamma=1e-4))
    probe: ProbeAmplitudes = field(default_factory=ProbeAmplitudes)
    families: tuple = ("equidistant", "random", "linear")
    n_values: tuple = tuple(range(1, 21))
    tau_points: int = rc.DEFAULT_TAU_POINTS
    draws: int = rc.DEFAULT_DRAWS
    gammas: tuple = tuple(np.logspace(-4, 0, 12))
    n_caps: tuple = (20, 10)
    state: dict = field(default_factory=lambda: {"kind": "coherent", "alpha": [1.5, 0.0]})
    mode: str = "analytic"
    oracle_dim: int = 40
    dephasing: float = 0.0
    grid: rc.GridSpec = field(default_factory=rc.GridSpec)
    method: str = "cubic"
    rho_dim: int = rc.DEFAULT_DIM
    dump_rho: bool = True
    verify_dims: tuple = ids.CONVERGENCE_DIMS
    verify_tol: float = ids.DEFAULT_TOL
    verify_keys: tuple | None = None
    output_dir: str = "pulsechi-out"
    prefix: str = ""
    seed: int = 0
    jobs: int = 1
    # set only when the config names an oscillator; verify otherwise uses its own suite values
    verify_params: OscillatorParams | None = None

    def as_dict(self) -> dict:
        p, probe = self.oscillator, self.probe
        return {
            "seed": self.seed,
            "mode": self.mode,
            "jobs": self.jobs,
            "oscillator": {"nu": p.nu, "gamma": p.gamma, "nbar": p.nbar, "g": p.g},
            "probe": {"psi_plus": _enc(probe.psi_plus), "psi_minus": _enc(probe.psi_minus)},
            "sweep": {
                "families": list(self.families),
                "n_values": list(self.n_values),
                "tau_points": self.tau_points,
                "draws": self.draws,
                "gammas": [float(g) for g in self.gammas],
                "n_caps": list(self.n_caps),
            },
            "state": dict(self.state),
            "oracle": {"dim": self.oracle_dim, "dephasing": self.dephasing},
            "grid": {
                "extent": self.grid.extent,
                "spacing": self.grid.spacing,
                "method": self.method,
                "dim": self.rho_dim,
                "dump_rho": self.dump_rho,
            },
            "verify": {
                "dims": list(self.verify_dims),
                "tol": self.verify_tol,
                "keys": None if self.verify_keys is None else list(self.verify_keys),
            },
            "output": {"dir": self.output_dir, "prefix": self.prefix},
        }

    @property
    def reference_state(self):
        return state_from_dict(self.state)

    def plan(self, kind: str, n_values=None) -> rc.SamplingPlan:
        grid = () if kind == "random" else tuple(rc.default_tau0_grid(self.tau_points))
        return rc.SamplingPlan(kind, tuple(n_values or self.n_values), grid, self.draws, self.seed)


def _enc(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _dec_complex(value, where: str) -> complex:
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or [re, im], got {value!r}")


def _check_keys(data: dict, schema: dict, path: str = ""):
    for key, value in data.items():
        where = f"{path}{key}"
        if key not in schema:
            raise ConfigError(f"unknown key '{where}'")
        kind = schema[key]
        if isinstance(kind, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"'{where}' must be a table")
            _check_keys(value, kind, where + ".")
        elif kind == "complex":
            _dec_complex(value, where)
        elif kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"'{where}' must be a number, got {value!r}")
        elif kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"'{where}' must be an integer, got {value!r}")
        elif not isinstance(value, kind):
            raise ConfigError(f"'{where}' must be of type {kind.__name__}, got {value!r}")


def load_config_text(text: str, source: str = "<config>") -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def build_config(data: dict) -> RunConfig:
    """Validate a nested mapping and turn it into a RunConfig."""
    _check_keys(data, SCHEMA)
    cfg = RunConfig()
    try:
        osc = dict(nu=1.0, gamma=1e-4, nbar=0.0, g=0.075)
        osc.update(data.get("oscillator", {}))
        cfg.oscillator = OscillatorParams(**{k: float(v) for k, v in osc.items()})
        probe = data.get("probe", {})
        if probe:
            cfg.probe = ProbeAmplitudes(
                _dec_complex(probe.get("psi_plus", 1 / math.sqrt(2)), "probe.psi_plus"),
                _dec_complex(probe.get("psi_minus", 1 / math.sqrt(2)), "probe.psi_minus"),
            )
        an._probe_prefactors(cfg.probe)
        if "oscillator" in data:
            cfg.verify_params = cfg.oscillator
    except (ValueError, an.DegenerateProbeError) as exc:
        raise ConfigError(str(exc)) from None

    sweep = data.get("sweep", {})
    if "families" in sweep:
        cfg.families = tuple(sweep["families"])
    for kind in cfg.families:
        if kind not in rc.KINDS:
            raise ConfigError(f"sweep.families: unknown family {kind!r}")
    if "n_values" in sweep and "n_max" in sweep:
        raise ConfigError("sweep: give either n_values or n_max, not both")
    if "n_values" in sweep:
        cfg.n_values = tuple(sweep["n_values"])
    elif "n_max" in sweep:
        cfg.n_values = tuple(range(1, sweep["n_max"] + 1))
    if not cfg.families or not cfg.n_values:
        raise ConfigError("sweep is empty: need at least one family and one N")
    if any(not isinstance(n, int) or isinstance(n, bool) or n < 1 for n in cfg.n_values):
        raise ConfigError("sweep.n_values must be positive integers")
    cfg.tau_points = sweep.get("tau_points", cfg.tau_points)
    cfg.draws = sweep.get("draws", cfg.draws)
    if cfg.tau_points < 1 or cfg.draws < 1:
        raise ConfigError("sweep.tau_points and sweep.draws must be >= 1")
    if "gammas" in sweep:
        cfg.gammas = tuple(float(g) for g in sweep["gammas"])
    elif any(k in sweep for k in ("gamma_min", "gamma_max", "gamma_points")):
        lo = sweep.get("gamma_min", 1e-4)
        hi = sweep.get("gamma_max", 1.0)
        if not (0 < lo <= hi):
            raise ConfigError("sweep: need 0 < gamma_min <= gamma_max")
        cfg.gammas = tuple(np.logspace(math.log10(lo), math.log10(hi), sweep.get("gamma_points", 12)))
    if not cfg.gammas or any(not (g >= 0 and math.isfinite(g)) for g in cfg.gammas):
        raise ConfigError("sweep.gammas must be a nonempty list of finite non-negative rates")
    if "n_caps" in sweep:
        cfg.n_caps = tuple(int(c) for c in sweep["n_caps"])
    if not cfg.n_caps or min(cfg.n_caps) < 1:
        raise ConfigError("sweep.n_caps must be positive integers")

    if "state" in data:
        cfg.state = dict(data["state"])
    try:
        state = state_from_dict(cfg.state)
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"state: {exc}") from None
    cfg.state = state_to_dict(state)

    cfg.mode = data.get("mode", cfg.mode)
    if cfg.mode not in ("analytic", "oracle"):
        raise ConfigError(f"mode must be 'analytic' or 'oracle', got {cfg.mode!r}")
    oracle = data.get("oracle", {})
    cfg.oracle_dim = oracle.get("dim", cfg.oracle_dim)
    cfg.dephasing = float(oracle.get("dephasing", cfg.dephasing))
    if cfg.oracle_dim < 4:
        raise ConfigError("oracle.dim must be >= 4")
    if cfg.dephasing < 0:
        raise ConfigError("oracle.dephasing must be >= 0")

    grid = data.get("grid", {})
    try:
        cfg.grid = rc.GridSpec(float(grid.get("extent", cfg.grid.extent)), float(grid.get("spacing", cfg.grid.spacing)))
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    cfg.method = grid.get("method", cfg.method)
    if cfg.method not in ("cubic", "linear"):
        raise ConfigError(f"grid.method must be 'cubic' or 'linear', got {cfg.method!r}")
    cfg.rho_dim = grid.get("dim", cfg.rho_dim)
    cfg.dump_rho = grid.get("dump_rho", cfg.dump_rho)
    if cfg.rho_dim < 1:
        raise ConfigError("grid.dim must be >= 1")

    verify = data.get("verify", {})
    if "dims" in verify:
        cfg.verify_dims = tuple(int(d) for d in verify["dims"])
    if not cfg.verify_dims or min(cfg.verify_dims) < 4:
        raise ConfigError("verify.dims must be integers >= 4")
    cfg.verify_tol = float(verify.get("tol", cfg.verify_tol))
    if "keys" in verify:
        unknown = [k for k in verify["keys"] if k not in ids.IDENTITY_KEYS]
        if unknown:
            raise ConfigError(f"verify.keys: unknown identities {unknown}")
        cfg.verify_keys = tuple(verify["keys"])

    out = data.get("output", {})
    cfg.output_dir = out.get("dir", cfg.output_dir)
    cfg.prefix = out.get("prefix", cfg.prefix)
    cfg.seed = data.get("seed", cfg.seed)
    cfg.jobs = data.get("jobs", cfg.jobs)
    if cfg.jobs < 1:
        raise ConfigError("jobs must be >= 1")
    return cfg


def _set_path(data: dict, dotted: str, value):
    node = data
    parts = dotted.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override '{dotted}': '{part}' is not a table")
    node[parts[-1]] = value


def _parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return key.strip(), value


def resolve_config(args) -> RunConfig:
    """Config file, then environment, then flags (flags win)."""
    data: dict = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file {path} not found")
        data = load_config_text(path.read_text(), str(path))
    if os.environ.get(ENV_OUTPUT):
        _set_path(data, "output.dir", os.environ[ENV_OUTPUT])
    if os.environ.get(ENV_JOBS):
        try:
            data["jobs"] = int(os.environ[ENV_JOBS])
        except ValueError:
            raise ConfigError(f"{ENV_JOBS} must be an integer") from None
    for item in args.set or []:
        key, value = _parse_override(item)
        _set_path(data, key, value)
    if args.output_dir:
        _set_path(data, "output.dir", args.output_dir)
    if args.jobs is not None:
        data["jobs"] = args.jobs
    if args.seed is not None:
        data["seed"] = args.seed
    if getattr(args, "mode", None):
        data["mode"] = args.mode
    return build_config(data)


# -- output ---------------------------------------------------------------


def fmt(x) -> str:
    # adding 0.0 folds -0.0 into 0.0
    return "%.17g" % (float(x) + 0.0)


def _header(cfg: RunConfig, command: str) -> str:
    meta = {"command": command, "version": __version__, "config": cfg.as_dict()}
    return "# " + json.dumps(meta, sort_keys=True) + "\n"


def write_csv(path: Path, cfg: RunConfig, command: str, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(_header(cfg, command))
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    path.write_text(buf.getvalue())
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    """Embedded metadata and data rows of a file written by ``write_csv``."""
    lines = Path(path).read_text().splitlines()
    meta = json.loads(lines[0][2:])
    rows = list(csv.DictReader(lines[1:]))
    return meta, rows


def write_manifest(path: Path, cfg: RunConfig, command: str, extra: dict) -> Path:
    info = {"command": command, "version": __version__, "config": cfg.as_dict()}
    info.update(extra)
    path.write_text(json.dumps(info, indent=2, sort_keys=True, default=str) + "\n")
    return path


def _out(cfg: RunConfig, name: str) -> Path:
    return Path(cfg.output_dir) / f"{cfg.prefix}{name}"


PLOTSCRIPTS = {
    "points": """set datafile separator ','
set size square
set xlabel 'Re zeta'
set ylabel 'Im zeta'
plot '{data}' every ::2 using 4:5 with dots title 'accessible points'
""",
    "measure": """set datafile separator ','
set xlabel 'Re beta'
set ylabel 'Im beta'
set zlabel 'Re chi'
splot '{data}' every ::2 using 1:2:3 with points pt 7 ps 0.3 title 'measured chi'
""",
    "reconstruct": """set datafile separator ','
set logscale x
set xlabel 'gamma / nu'
set ylabel 'F'
plot '{data}' every ::2 using 3:4 with points pt 7 title 'fidelity'
""",
}


def emit_plotscript(cfg: RunConfig, command: str, data: Path) -> Path:
    path = _out(cfg, f"{command}.gp")
    path.write_text(PLOTSCRIPTS[command].format(data=data.name))
    return path


# -- commands -------------------------------------------------------------


def _points_task(args):
    p, kind, n, plan = args
    taus = plan.tau_batch(n)
    zeta = an.zeta_batch(p, taus)
    return kind, n, plan.labels(n), zeta


def _map(fn, tasks, jobs: int):
    # pool.map keeps sweep order whatever the completion order
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_points(cfg: RunConfig, plotscript: bool = False) -> dict:
    p = cfg.oscillator
    tasks = []
    for kind in cfg.families:
        plan = cfg.plan(kind)
        tasks += [(p, kind, n, plan) for n in cfg.n_values]
    rows, summary = [], []
    for kind, n, labels, zeta in _map(_points_task, tasks, cfg.jobs):
        for label, z in zip(labels, zeta):
            flags = "" if np.isfinite(z) else "nonfinite"
            rows.append((kind, n, int(label) if kind == "random" else float(label), float(z.real), float(z.imag), flags))
        summary.append({"family": kind, "N": n, "max_abs_zeta": float(np.abs(zeta).max())})
    path = write_csv(_out(cfg, "points.csv"), cfg, "points",
                     ["family", "N", "tau0_or_seed", "re_zeta", "im_zeta", "flags"], rows)
    files = [path]
    if plotscript:
        files.append(emit_plotscript(cfg, "points", path))
    manifest = write_manifest(_out(cfg, "points.json"), cfg, "points",
                              {"files": [f.name for f in files], "max_abs_zeta": summary})
    return {"files": files + [manifest], "summary": summary}


def _merged(samples: rc.SampleSet) -> rc.SampleSet:
    key = np.round(np.c_[samples.beta.real, samples.beta.imag] / 1e-12).astype(np.int64)
    _, first = np.unique(key, axis=0, return_index=True)
    first = np.sort(first)
    return rc.SampleSet(samples.beta[first], samples.value[first], samples.source,
                        samples.sequence[first], samples.flags)


def _collect(cfg: RunConfig, kind: str, p: OscillatorParams, n_values=None) -> rc.SampleSet:
    return rc.collect_samples(p, cfg.probe, cfg.plan(kind, n_values), cfg.reference_state,
                              cfg.mode, cfg.oracle_dim, cfg.dephasing, cfg.jobs)


def cmd_measure(cfg: RunConfig, plotscript: bool = False) -> dict:
    rows = []
    per_family = {}
    for kind in cfg.families:
        samples = _merged(_collect(cfg, kind, cfg.oscillator))
        per_family[kind] = {
            "samples": len(samples),
            "hermiticity_residual": samples.hermiticity_residual(),
            "flagged_sequences": len(samples.flags),
        }
        for b, v, s in zip(samples.beta, samples.value, samples.sequence):
            rows.append((kind, float(b.real), float(b.imag), float(v.real), float(v.imag), samples.source, int(s),
                         "; ".join(samples.flags.get(int(s), []))))
    path = write_csv(_out(cfg, "samples.csv"), cfg, "measure",
                     ["family", "re_beta", "im_beta", "re_chi", "im_chi", "source", "sequence", "flags"], rows)
    files = [path]
    if plotscript:
        files.append(emit_plotscript(cfg, "measure", path))
    manifest = write_manifest(_out(cfg, "measure.json"), cfg, "measure",
                              {"files": [f.name for f in files], "families": per_family})
    return {"files": files + [manifest], "summary": per_family}


def _fidelity_task(args):
    cfg, kind, cap, gamma = args
    p = cfg.oscillator.replace(gamma=float(gamma))
    samples = _collect(cfg, kind, p, [n for n in cfg.n_values if n <= cap])
    chi = rc.interpolate_chi(samples, cfg.grid, cfg.method)
    return rc.fidelity(cfg.reference_state.chi, chi)


def cmd_reconstruct(cfg: RunConfig, plotscript: bool = False) -> dict:
    state = cfg.reference_state
    caps = [c for c in cfg.n_caps if any(n <= c for n in cfg.n_values)]
    if not caps:
        raise rc.CoverageError("no N value falls under any of the N-caps")
    tasks = [(cfg, kind, cap, g) for kind in cfg.families for cap in caps for g in cfg.gammas]
    inner = cfg.jobs
    if cfg.jobs > 1:
        # parallelize across sweep points, not inside each one
        cfg_serial = RunConfig(**{**cfg.__dict__, "jobs": 1})
        tasks = [(cfg_serial,) + t[1:] for t in tasks]
    fids = _map(_fidelity_task, tasks, inner)
    rows = [(kind, cap, float(g), f) for (_, kind, cap, g), f in zip(tasks, fids)]
    path = write_csv(_out(cfg, "fidelity.csv"), cfg, "reconstruct",
                     ["family", "n_max", "gamma", "fidelity"], rows)
    files = [path]
    dumps = []
    if cfg.dump_rho:
        gamma0 = min(cfg.gammas)
        cap = max(caps)
        for kind in cfg.families:
            p = cfg.oscillator.replace(gamma=float(gamma0))
            samples = _collect(cfg, kind, p, [n for n in cfg.n_values if n <= cap])
            chi = rc.interpolate_chi(samples, cfg.grid, cfg.method)
            res = rc.reconstruct_rho(chi, cfg.rho_dim, state, paths="both")
            npz, meta = rc_dump(cfg, kind, gamma0, cap, chi, res)
            files += [npz, meta]
            dumps.append({"family": kind, "gamma": gamma0, "n_max": cap, "fidelity_chi": res.fidelity,
                          "fidelity_rho": res.fidelity_rho, "residuals": res.residuals, "flags": res.flags})
    if plotscript:
        files.append(emit_plotscript(cfg, "reconstruct", path))
    manifest = write_manifest(_out(cfg, "reconstruct.json"), cfg, "reconstruct",
                              {"files": [f.name for f in files], "reconstructions": dumps})
    return {"files": files + [manifest], "rows": rows, "reconstructions": dumps}


def rc_dump(cfg, kind, gamma, cap, chi, res):
    from .oracle import dump_arrays

    name = _out(cfg, f"rho_{kind}_g{gamma:.3g}_n{cap}")
    meta = {"command": "reconstruct", "version": __version__, "config": cfg.as_dict(), "family": kind,
            "gamma": gamma, "n_max": cap, "fidelity_chi": res.fidelity, "fidelity_rho": res.fidelity_rho,
            "residuals": res.residuals, "flags": res.flags, "grid": {"extent": chi.grid.extent,
                                                                     "spacing": chi.grid.spacing}}
    return dump_arrays(name, {"rho_tilde": res.rho_tilde, "chi_tilde": chi.values, "axis": chi.grid.axis}, meta)


def cmd_verify(cfg: RunConfig) -> dict:
    report = ids.convergence_study(cfg.verify_dims, cfg.verify_params, cfg.verify_keys, cfg.verify_tol)
    ok = all(r["converged"] and r["monotone"] for r in report.values())
    lines = []
    for key, r in report.items():
        status = "PASS" if r["converged"] and r["monotone"] else "FAIL"
        notes = []
        if not r["converged"]:
            notes.append(f"not converged at d={r['dims'][-1]}")
        if not r["monotone"]:
            notes.append("not monotone in d")
        res = " ".join(f"d={d}:{x:.2e}" for d, x in zip(r["dims"], r["residuals"]))
        lines.append(f"{status} {key:13s} {res}" + (f"  ({'; '.join(notes)})" if notes else ""))
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = write_manifest(_out(cfg, "verify.json"), cfg, "verify", {"passed": ok, "identities": report})
    return {"passed": ok, "lines": lines, "files": [manifest], "report": report}


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pulsechi", description="Pulsed-probe characteristic-function toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("points", "accessible reciprocal-phase-space points for a sequence sweep"),
        ("measure", "characteristic-function samples of a reference state"),
        ("reconstruct", "fidelity sweep over damping rates plus density-matrix dumps"),
        ("verify", "truncated-Fock identity suite with convergence report"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("-c", "--config", help="TOML run configuration")
        cmd.add_argument("--set", action="append", metavar="KEY=VALUE",
                         help="override a config entry, e.g. oscillator.gamma=1e-2 (repeatable)")
        cmd.add_argument("-o", "--output-dir")
        cmd.add_argument("-j", "--jobs", type=int)
        cmd.add_argument("--seed", type=int)
        if name in ("measure", "reconstruct"):
            cmd.add_argument("--mode", choices=("analytic", "oracle"))
        if name != "verify":
            cmd.add_argument("--emit-plotscript", action="store_true", help="also write a gnuplot script")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    plot = getattr(args, "emit_plotscript", False)
    try:
        if args.command == "points":
            result = cmd_points(cfg, plot)
            for row in result["summary"]:
                print(f"{row['family']:12s} N={row['N']:3d} max|zeta|={row['max_abs_zeta']:.10f}")
        elif args.command == "measure":
            result = cmd_measure(cfg, plot)
            for kind, info in result["summary"].items():
                print(f"{kind:12s} samples={info['samples']} hermiticity={info['hermiticity_residual']:.2e}")
        elif args.command == "reconstruct":
            result = cmd_reconstruct(cfg, plot)
            for kind, cap, g, f in result["rows"]:
                print(f"{kind:12s} N<={cap:3d} gamma={g:.3e} F={f:.6f}")
        else:
            result = cmd_verify(cfg)
            print("\n".join(result["lines"]))
            if not result["passed"]:
                print("identity suite did not converge", file=sys.stderr)
                return EXIT_CONVERGENCE
    except rc.CoverageError as exc:
        print(f"coverage error: {exc}", file=sys.stderr)
        if exc.uncovered:
            print("uncovered annuli: " + ", ".join(f"[{a:.2f}, {b:.2f})" for a, b in exc.uncovered), file=sys.stderr)
        return EXIT_COVERAGE
    except an.PoleError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    for f in result["files"]:
        print(f"wrote {f}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
