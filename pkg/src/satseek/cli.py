"""``satseek`` command line.

Exit codes: 0 ok, 1 usage or input error, 2 infeasible or failed verdict,
3 divergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .config import ProjectConfig
from .exceptions import DivergenceError, InputError, SatseekError
from .lmi import get_backend, solve_analysis, solve_synthesis
from .simulate import SimConfig, simulate_full
from .verify import averaging_sweep, compare_gains, run_verdict, stability_constants

EXIT_OK, EXIT_ERROR, EXIT_FAIL, EXIT_DIVERGED = 0, 1, 2, 3
SWEEP_MAX_ORDER = -0.7
SWEEP_RATIO_RANGE = (0.3, 0.8)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_rows(path: Path, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: f"{v:.12g}" if isinstance(v, float) else v for k, v in row.items()})


def _read_gain(path) -> np.ndarray:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read gain file {path}: {exc}") from None
    gain = data.get("gain") if isinstance(data, dict) else data
    if gain is None:
        raise InputError(f"{path}: no 'gain' entry")
    return np.array(gain, dtype=float)


class Context:
    def __init__(self, args):
        self.cfg = ProjectConfig.load(args.config)
        self.out = Path(args.out or self.cfg.outputs.directory)
        self.out.mkdir(parents=True, exist_ok=True)
        self.seed = args.seed
        self.gain_path = args.gain
        self.plant = self.cfg.plant_spec()
        self.dither = self.cfg.dither_spec()
        self.formats = set(self.cfg.outputs.formats)

    def synthesize(self):
        s = self.cfg.synthesis
        return solve_synthesis(
            self.plant.hessian, self.plant.sat_limits, s.eta, s.epsilon,
            backend=get_backend(), margin_tol=s.margin_tol, lmi_31_block=s.lmi_31_block, seed=self.seed,
        )

    def gain(self) -> np.ndarray:
        """``--gain`` file, else the config's fixed gain, else a fresh synthesis."""
        if self.gain_path:
            gain = _read_gain(self.gain_path)
        elif self.cfg.simulation.gain is not None:
            gain = np.array(self.cfg.simulation.gain)
        else:
            res = self.synthesize()
            if not res.feasible:
                raise _Infeasible("synthesis is infeasible; no gain to simulate")
            gain = res.gain
        if gain.shape != (self.plant.dim, self.plant.dim):
            raise InputError(f"gain has shape {gain.shape}, plant needs {(self.plant.dim,) * 2}")
        return gain

    def sim_config(self, gain) -> SimConfig:
        s = self.cfg.simulation
        return SimConfig(self.plant, self.dither, gain, self.cfg.alpha(), np.array(s.theta_hat0),
                         s.t_end, s.step, s.washout)


class _Infeasible(SatseekError):
    pass


def cmd_synth(ctx: Context) -> int:
    res = ctx.synthesize()
    lines = [f"status: {res.status}"]
    if res.feasible:
        consts = stability_constants(ctx.plant.hessian, res.recovered_certificate,
                                     np.array(ctx.cfg.simulation.theta_hat0) - ctx.plant.optimizer)
        payload = res.to_dict()
        payload["constants"] = consts.to_dict()
        _write_json(ctx.out / "gain.json", payload)
        lines += [
            f"gain K: {np.array2string(res.gain, precision=6)}",
            f"epsilon: {res.epsilon}",
            f"logdet(Q0): {res.objective:.6g}",
            f"vertex max eigenvalues: {res.analysis.vertex_max_eigs}",
            f"inclusion row min eigenvalues: {res.inclusion.row_min_eigs}",
            f"kappa: {consts.kappa:.6g}  kappa_bar: {consts.kappa_bar:.6g}  kappa_y: {consts.kappa_y:.6g}",
        ]
    else:
        lines.append("no gain certifies the requested decay rate with these saturation limits")
    res.problem.dump(ctx.out / "problem.json")
    (ctx.out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if res.feasible else EXIT_FAIL


def cmd_analyze(ctx: Context) -> int:
    gain = ctx.gain()
    res = solve_analysis(ctx.plant.hessian, gain, ctx.cfg.synthesis.eta, ctx.plant.sat_limits,
                         backend=get_backend(), margin_tol=ctx.cfg.synthesis.margin_tol, seed=ctx.seed)
    payload = {"status": res.status, "feasible": res.feasible, "gain": gain.tolist()}
    if res.certificate is not None:
        payload["certificate"] = res.certificate.to_dict()
        payload["analysis"] = res.analysis.to_dict()
        payload["inclusion"] = res.inclusion.to_dict()
        if res.feasible:
            payload["constants"] = stability_constants(
                ctx.plant.hessian, res.certificate,
                np.array(ctx.cfg.simulation.theta_hat0) - ctx.plant.optimizer).to_dict()
    _write_json(ctx.out / "certificate.json", payload)
    print(f"analysis: {res.status}")
    return EXIT_OK if res.feasible else EXIT_FAIL


def cmd_simulate(ctx: Context) -> int:
    cfg = ctx.sim_config(ctx.gain())
    code = EXIT_OK
    try:
        trace = simulate_full(cfg)
    except DivergenceError as exc:
        trace, code = exc.trace, EXIT_DIVERGED
    trace.to_csv(ctx.out / "trace.csv")
    if "svg" in ctx.formats:
        from .plots import plot_trace
        plot_trace(trace, ctx.plant, ctx.out)
    verdict = run_verdict("simulation", cfg, trace if code == EXIT_OK else None)
    _write_json(ctx.out / "summary.json", verdict.to_dict())
    state = "diverged" if verdict.diverged else ("converged" if verdict.converged else "not converged")
    print(f"simulation {state}: final error {verdict.final_error:.4g}, |y - Q*| {verdict.final_y_error:.4g}")
    return code


def cmd_sweep(ctx: Context) -> int:
    sweep = ctx.cfg.sweep
    cfg = ctx.sim_config(ctx.gain())
    if sweep.t_end is not None:
        cfg = cfg.replace(t_end=sweep.t_end)
    report = averaging_sweep(cfg, sweep.omega_multipliers, reference=sweep.reference)
    lo, hi = SWEEP_RATIO_RANGE
    passed = (
        not report.diverged
        and report.fitted_order <= SWEEP_MAX_ORDER
        and all(lo <= r <= hi for r in report.ratios)
    )
    payload = report.to_dict()
    payload["passed"] = passed
    _write_json(ctx.out / "sweep.json", payload)
    _write_rows(ctx.out / "sweep.csv", report.rows())
    if "svg" in ctx.formats:
        from .plots import plot_sweep
        plot_sweep(report, ctx.out / "sweep.svg")
    print(f"fitted order {report.fitted_order:.3f}, ratios {np.round(report.ratios, 3).tolist()}")
    return EXIT_OK if passed else EXIT_FAIL


def cmd_compare(ctx: Context) -> int:
    cfg = ctx.sim_config(ctx.gain())
    diag = cfg.replace(gain=ctx.cfg.comparison.diagonal_gain * np.eye(ctx.plant.dim))
    verdicts = compare_gains(cfg, diag)
    rows = [v.to_dict() for v in verdicts]
    _write_rows(ctx.out / "compare.csv", rows)
    _write_json(ctx.out / "compare.json", rows)
    for v in verdicts:
        print(f"{v.name}: final error {v.final_error:.4g} converged={v.converged} diverged={v.diverged}")
    return EXIT_OK if verdicts[0].converged else EXIT_FAIL


COMMANDS = {
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satseek", description="Saturated extremum seeking: LMI gain design and simulation.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="project JSON file")
    parser.add_argument("--gain", help="JSON file with a 'gain' matrix (e.g. gain.json from synth)")
    parser.add_argument("--out", help="output directory (default: outputs.directory from the config)")
    parser.add_argument("--seed", type=int, default=0, help="seed for sampled checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_ERROR
    try:
        ctx = Context(args)
        return COMMANDS[args.command](ctx)
    except _Infeasible as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (SatseekError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
