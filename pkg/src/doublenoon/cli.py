"""Command-line interface.

Subcommands: ``params validate``, ``params show``, ``ideal``, ``timing``,
``simulate``, ``sweep``, ``interfere`` and ``hamiltonian dump``.  Errors exit
nonzero and print a JSON object ``{"error": <category>, "message": ...}`` on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .analytic import ideal_ladder
from .device import (
    GHZ,
    MHZ,
    US,
    ConfigError,
    DeviceParams,
    cavity_lifetimes,
    lambda_eff,
    load_params,
    params_to_config,
    quality_factors,
)
from .hamiltonian import modified_hamiltonians
from .interferometer import (
    coincidence_closed_form,
    coincidence_probability,
    estimate_phase_error,
)
from .schedule import compile_schedule, total_time
from .solver import ENGINES, PropagatorConfig, SolverError, run_protocol
from .solver.protocol import side_spaces
from .solver.report import result_to_report, write_report

EXIT_CODES = {"config": 2, "solver": 3, "invalid-argument": 4, "io": 5}
SWEEP_PARAMS = ("g", "omega", "crosstalk", "crosstalk_ratio", "g_ratio", "detuning_mismatch")
SWEEP_COLUMNS = (
    "param", "value", "N", "engine", "trajectories", "seed", "fidelity", "stderr", "guard_final",
    "g1_MHz", "g2_MHz", "delta1_GHz", "delta2_GHz", "omega_gf_MHz", "omega_ge_rabi_MHz", "g12_MHz", "g34_MHz",
)


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# --- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """A one-parameter scan of the protocol fidelity.

    ``param`` values are per 2 pi in MHz for ``g``, ``omega``, ``crosstalk``
    and ``detuning_mismatch``; ``crosstalk_ratio`` is ``g12/g`` and
    ``g_ratio`` is ``g1/g2`` (with ``g2`` held fixed).
    """

    param: str
    values: tuple[float, ...]
    N: int
    engine: str = "mcwf"
    trajectories: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {self.param!r}")
        if not self.values:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if self.engine not in ENGINES:
            raise ValueError(f"engine must be one of {ENGINES}")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def apply_sweep_value(params: DeviceParams, param: str, value: float) -> DeviceParams:
    if param == "g":
        return replace(params, g1=value * MHZ, g2=value * MHZ)
    if param == "omega":
        return replace(params, omega_gf=value * MHZ, omega_ge_rabi=value * MHZ)
    if param == "crosstalk":
        return replace(params, g12=value * MHZ, g34=value * MHZ)
    if param == "crosstalk_ratio":
        return replace(params, g12=value * params.g1, g34=value * params.g1)
    if param == "g_ratio":
        return replace(params, g1=value * params.g2)
    if param == "detuning_mismatch":
        return replace(params, delta1=params.delta2 + value * MHZ)
    raise ValueError(f"unknown sweep parameter {param!r}")


def run_sweep(spec: SweepSpec, params: DeviceParams, cfg: PropagatorConfig | None = None,
              cavity_dim: int | None = None, ideal_pulses: bool = False) -> list[dict]:
    """One row per grid point, in grid order.  Every point uses the same master seed."""
    cfg = cfg or PropagatorConfig()
    cfg = replace(cfg, trajectories=spec.trajectories, seed=spec.seed)
    rows = []
    for value in spec.values:
        p = apply_sweep_value(params, spec.param, value)
        start = time.perf_counter()
        try:
            res = run_protocol(compile_schedule(spec.N, p), cfg=cfg, engine=spec.engine,
                               cavity_dim=cavity_dim, ideal_pulses=ideal_pulses)
        except SolverError as exc:
            raise type(exc)(f"{spec.param}={value!r}: {exc}") from exc
        rows.append({
            "param": spec.param,
            "value": value,
            "N": spec.N,
            "engine": spec.engine,
            "trajectories": spec.trajectories if spec.engine == "mcwf" else 0,
            "seed": spec.seed,
            "fidelity": res.fidelity,
            "stderr": res.stderr,
            "guard_final": res.final_guard,
            "g1_MHz": p.g1 / MHZ,
            "g2_MHz": p.g2 / MHZ,
            "delta1_GHz": p.delta1 / GHZ,
            "delta2_GHz": p.delta2 / GHZ,
            "omega_gf_MHz": p.omega_gf / MHZ,
            "omega_ge_rabi_MHz": p.omega_ge_rabi / MHZ,
            "g12_MHz": p.g12 / MHZ,
            "g34_MHz": p.g34 / MHZ,
            "wall_time_s": time.perf_counter() - start,
            "params": p,
        })
    return rows


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def sweep_csv(rows: list[dict], timing: bool = False) -> str:
    """CSV text of sweep rows; wall time only when ``timing`` (it is not reproducible)."""
    cols = SWEEP_COLUMNS + (("wall_time_s",) if timing else ())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for row in sorted(rows, key=lambda r: r["value"]):
        w.writerow([_fmt(row[c]) for c in cols])
    return buf.getvalue()


# --- output helpers -----------------------------------------------------------

def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise CliError("io", f"cannot write {out}: {exc}") from exc


def _params(args) -> DeviceParams:
    return load_params(args.config) if args.config else DeviceParams.baseline()


def _cfg(args) -> PropagatorConfig:
    kw = {"seed": args.seed, "workers": args.workers}
    if args.trajectories is not None:
        kw["trajectories"] = args.trajectories
    return PropagatorConfig(**kw)


# --- subcommands --------------------------------------------------------------

def cmd_params_validate(args) -> None:
    p = _params(args)
    N = args.N
    lam = lambda_eff(p)
    per, joint = cavity_lifetimes(p, nbar=[N] * 4)
    q = quality_factors(p)
    info = {
        "lambda_over_2pi_MHz": lam / MHZ,
        "Delta_over_2pi_GHz": p.cavity_detuning / GHZ,
        "cavity_frequencies_over_2pi_GHz": [w / GHZ for w in p.cavity_frequencies],
        "quality_factors": q,
        "nbar": N,
        "cavity_lifetimes_us": [t / US for t in per],
        "joint_cavity_lifetime_us": joint / US,
        "large_detuning": p.large_detuning,
        "mu_set": p.mu is not None,
    }
    _emit(json.dumps(info, indent=2) + "\n", args.out)


def cmd_params_show(args) -> None:
    _emit(params_to_config(_params(args)), args.out)


def cmd_ideal(args) -> None:
    p = _params(args)
    lines = [f"# ideal ladder, N={args.N}"]
    for st in ideal_ladder(args.N, p):
        kets = " + ".join(
            f"({a.real:+.6f}{a.imag:+.6f}j)|{k[0]}{k[1]},{k[2]}{k[3]}{k[4]}{k[5]}>"
            for k, a in st.canonical().items()
        )
        ph = st.step_phase
        lines.append(f"{st.label:12s} step_phase=({ph.real:+.6f}{ph.imag:+.6f}j)  {kets}")
    lines.append("")
    lines.append(compile_schedule(args.N, p, include_bell=p.mu is not None, include_gaps=True).to_csv())
    _emit("\n".join(lines), args.out)


def cmd_timing(args) -> None:
    p = _params(args)
    sched = compile_schedule(args.N, p, include_bell=args.bell, include_gaps=args.gaps)
    _emit(sched.to_csv(), args.out)
    if args.out not in (None, "-"):
        print(f"total_time_s={total_time(sched)!r}")


def cmd_simulate(args) -> None:
    p = _params(args)
    cfg = _cfg(args)
    sched = compile_schedule(args.N, p, include_bell=args.bell, include_gaps=args.gaps)
    res = run_protocol(sched, cfg=cfg, engine=args.engine, ideal_pulses=args.ideal_pulses,
                       cavity_dim=args.cavity_dim)
    report = result_to_report(res, p, cfg, {"N": args.N, "include_bell": args.bell, "include_gaps": args.gaps})
    if args.out and args.out != "-":
        try:
            write_report(args.out, report)
        except OSError as exc:
            raise CliError("io", f"cannot write {args.out}: {exc}") from exc
    line = f"N={args.N} engine={args.engine} fidelity={res.fidelity:.6f}"
    if res.stderr:
        line += f" stderr={res.stderr:.6f}"
    line += f" guard={res.final_guard:.3e} wall={res.diagnostics['wall_time']:.2f}s"
    print(line)


def _grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise CliError("invalid-argument", f"bad value grid {text!r}") from exc


def cmd_sweep(args) -> None:
    p = _params(args)
    spec = SweepSpec(args.param, _grid(args.values), args.N, args.engine,
                     args.trajectories if args.trajectories is not None else 200, args.seed)
    rows = run_sweep(spec, p, PropagatorConfig(workers=args.workers), cavity_dim=args.cavity_dim,
                     ideal_pulses=args.ideal_pulses)
    _emit(sweep_csv(rows, timing=args.timing), args.out)
    if args.report:
        report = {
            "sweep": {"param": spec.param, "values": list(spec.values), "N": spec.N, "engine": spec.engine,
                      "trajectories": spec.trajectories, "seed": spec.seed},
            "params": p.to_dict(),
            "rows": [{k: v for k, v in r.items() if k != "params"} for r in rows],
        }
        try:
            write_report(args.report, report)
        except OSError as exc:
            raise CliError("io", f"cannot write {args.report}: {exc}") from exc


def cmd_interfere(args) -> None:
    if args.phis:
        phis = _grid(args.phis)
    else:
        phis = tuple(np.linspace(0.0, math.pi / args.N, args.points, endpoint=False))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["phi", "P_closed_form", "P_bruteforce", "dphi_empirical", "dphi_analytic"])
    for i, phi in enumerate(phis):
        try:
            est = estimate_phase_error(args.N, phi, args.shots, seed=args.seed + i)
            emp = repr(est.empirical)
        except ValueError:
            emp = "nan"
        w.writerow([repr(float(phi)), repr(coincidence_closed_form(args.N, phi)),
                    repr(coincidence_probability(args.N, phi)), emp, repr(1 / (2 * args.N))])
    _emit(buf.getvalue(), args.out)


def cmd_hamiltonian_dump(args) -> None:
    p = _params(args)
    space = side_spaces(args.cavity_dim or args.N + 2)[args.side]
    spec = modified_hamiltonians(p, space, args.phase, side=args.side)
    _emit(spec.describe(args.max_entries) + "\n", args.out)


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="device configuration file (INI)")
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--trajectories", type=int, help="MCWF trajectory count")
    common.add_argument("--engine", choices=ENGINES, default="mcwf")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--workers", type=int, default=1, help="processes for trajectories")
    common.add_argument("-N", "--N", type=int, default=2, help="target photon number")
    common.add_argument("--cavity-dim", type=int, help="cavity truncation (default N+2)")

    ap = argparse.ArgumentParser(prog="doublenoon", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    pp = sub.add_parser("params", help="inspect device parameters")
    psub = pp.add_subparsers(dest="action", required=True)
    psub.add_parser("validate", parents=[common], help="print derived quantities").set_defaults(func=cmd_params_validate)
    psub.add_parser("show", parents=[common], help="emit the configuration").set_defaults(func=cmd_params_show)

    sub.add_parser("ideal", parents=[common], help="ideal state ladder and timing").set_defaults(func=cmd_ideal)

    t = sub.add_parser("timing", parents=[common], help="segment table as CSV")
    t.add_argument("--bell", action="store_true", help="include Bell preparation")
    t.add_argument("--gaps", action="store_true", help="include the four adjustment gaps")
    t.set_defaults(func=cmd_timing)

    s = sub.add_parser("simulate", parents=[common], help="run the protocol once")
    s.add_argument("--bell", action="store_true")
    s.add_argument("--gaps", action="store_true")
    s.add_argument("--ideal-pulses", action="store_true")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", parents=[common], help="fidelity versus one parameter (CSV)")
    w.add_argument("--param", choices=SWEEP_PARAMS, required=True)
    w.add_argument("--values", required=True, help="comma-separated, strictly increasing")
    w.add_argument("--report", help="also write a JSON report")
    w.add_argument("--timing", action="store_true", help="add a wall-time column (not reproducible)")
    w.add_argument("--ideal-pulses", action="store_true")
    w.set_defaults(func=cmd_sweep)

    i = sub.add_parser("interfere", parents=[common], help="coincidence fringe and phase error (CSV)")
    i.add_argument("--phis", help="comma-separated phases (rad)")
    i.add_argument("--points", type=int, default=32, help="grid size when --phis is absent")
    i.add_argument("--shots", type=int, default=10000)
    i.set_defaults(func=cmd_interfere)

    h = sub.add_parser("hamiltonian", help="debug dumps")
    hsub = h.add_subparsers(dest="action", required=True)
    d = hsub.add_parser("dump", parents=[common], help="nonzero entries of a composite Hamiltonian")
    d.add_argument("--phase", type=int, choices=(1, 2, 3), default=1)
    d.add_argument("--side", choices=("left", "right"), default="left")
    d.add_argument("--max-entries", type=int)
    d.set_defaults(func=cmd_hamiltonian_dump)
    return ap


def _fail(category: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": category, "message": message}) + "\n")
    return EXIT_CODES.get(category, EXIT_CODES["solver"])


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except CliError as exc:
        return _fail(exc.category, str(exc))
    except ConfigError as exc:
        return _fail("config", str(exc))
    except SolverError as exc:
        return _fail(exc.category, str(exc))
    except (ValueError, KeyError) as exc:
        return _fail("invalid-argument", str(exc))
    except OSError as exc:
        return _fail("io", str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
