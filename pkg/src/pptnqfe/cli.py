"""Command-line harness: one subcommand per experiment, CSV as the record.

Exit codes: 0 success, 1 invalid input, 2 numerical failure (non-convergence
or divergence). Every run writes ``run.json`` next to its CSV output.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import kernel, learning, pde
from .basis import Grid, GridKind, Transform, eval_all
from .encoder import FeatureEncoding, encode_1d
from .mps import dumps as mps_dumps
from .mps import max_rank
from .output import Series, rng_stream, write_csv, write_svg
from .quantum_sim import compile_mps_to_circuit

__all__ = ["main", "run", "build_parser"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; that code is reserved for numerics here
    def error(self, message: str):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--json", metavar="FILE", help="JSON file of flag values (command-line flags win)")
    common.add_argument("--plot", action="store_true", help="also write SVG plots")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--out", default="out", help="output directory, or a .csv file path")

    parser = _Parser(prog="pptnqfe", description="Piecewise-polynomial tensor-network feature experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("basis", parents=[common], help="sample every hat function on a uniform mesh")
    p.add_argument("--qubits", type=_positive_int, default=3)
    p.add_argument("--grid", choices=["closed", "interior"], default="closed")
    p.add_argument("--transform", choices=["linear", "sqrt"], default="linear")
    p.add_argument("--points", type=_positive_int, default=512)

    p = sub.add_parser("encode", parents=[common], help="encode one value as an MPS and a circuit")
    p.add_argument("--qubits", type=_positive_int, default=3)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--grid", choices=["closed", "interior"], default="closed")
    p.add_argument("--transform", choices=["linear", "sqrt"], default="sqrt")
    p.add_argument("--dump", action="store_true", help="print the MPS serialisation to stdout")

    p = sub.add_parser("pde", parents=[common], help="1D Poisson solve and point evaluation")
    p.add_argument("--qubits", type=_positive_int, default=5)
    p.add_argument("--solver", choices=["classical", "variational"], default="classical")
    p.add_argument("--layers", type=_positive_int, default=8)
    p.add_argument("--max-iters", type=_positive_int, default=3000)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--eval-points", type=_positive_int, default=10)
    p.add_argument("--method", choices=["hadamard", "direct"], default="hadamard")

    p = sub.add_parser("regress", parents=[common], help="regression experiments")
    p.add_argument("--experiment", choices=["jump", "sine", "multistep", "spectrum"], default="jump")
    p.add_argument("--qubits", type=_positive_int, default=None)
    p.add_argument("--encoding", choices=["pptnqfe", "rotation"], default="pptnqfe")
    p.add_argument("--layers", type=_positive_int, default=None)
    p.add_argument("--epochs", type=_positive_int, default=None)
    p.add_argument("--lr", type=float, default=0.05)

    p = sub.add_parser("classify", parents=[common], help="kernel classification")
    p.add_argument("--dataset", choices=["moons", "lines"], default="moons")
    p.add_argument("--kernel", choices=["pptnqfe", "angle", "both"], default="both")
    p.add_argument("--qubits-per-feature", type=_positive_int, default=3)
    p.add_argument("--lambda", dest="lam", type=float, default=1e-6)
    p.add_argument("--angle-frequencies", choices=["linear", "exponential"], default="linear",
                   help="angle qubits use frequencies 1..q (linear) or 1, 2, 4, ... (exponential)")
    p.add_argument("--angle-scale", type=float, default=1.0)
    return parser


def _parse(argv: list[str]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.json is None:
        return args
    try:
        config = json.loads(Path(args.json).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.json}: {exc}") from exc
    if not isinstance(config, dict):
        raise UsageError(f"config {args.json} must hold a JSON object")
    config = {k.replace("-", "_"): v for k, v in config.items()}
    config.pop("command", None)
    unknown = sorted(set(config) - set(vars(args)))
    if unknown:
        raise UsageError(f"unknown keys in {args.json}: {', '.join(unknown)}")
    # reparse with the file values as defaults so explicit flags still win
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    subparsers.choices[args.command].set_defaults(**config)
    return parser.parse_args(argv)


def _outputs(out: str, command: str) -> tuple[Path, Path]:
    path = Path(out)
    if path.suffix.lower() == ".csv":
        return path, path.parent
    return path / f"{command}.csv", path


def _sibling(csv_path: Path, suffix: str, ext: str = ".csv") -> Path:
    return csv_path.with_name(f"{csv_path.stem}_{suffix}{ext}")


def _grid(name: str, n: int) -> Grid:
    return Grid(n, GridKind.CLOSED if name == "closed" else GridKind.INTERIOR)


def _transform(name: str) -> Transform:
    return Transform.LINEAR if name == "linear" else Transform.SQRT_HAT


# --- subcommands --------------------------------------------------------------
# Each returns (summary dict, list of written paths).


def _cmd_basis(args, csv_path):
    grid = _grid(args.grid, args.qubits)
    transform = _transform(args.transform)
    xs = np.linspace(-1.0, 1.0, args.points)
    values = np.array([eval_all(grid, x, transform) for x in xs])
    header = ["x"] + [f"hat_{k}" for k in range(grid.N)]
    written = [write_csv(csv_path, header, ([x, *row] for x, row in zip(xs, values)))]
    if args.plot:
        series = [Series(f"hat_{k}", xs, values[:, k]) for k in range(grid.N)]
        written.append(write_svg(csv_path.with_suffix(".svg"), series, "basis functions", "x", "value"))
    return {"n_functions": grid.N, "spacing": grid.spacing}, written


def _cmd_encode(args, csv_path):
    enc = FeatureEncoding(_grid(args.grid, args.qubits), _transform(args.transform))
    mps = encode_1d(enc, args.x)
    dense = mps.to_dense()
    text = mps_dumps(mps)
    if args.dump:
        sys.stdout.write(text)
    rows = [(k, format(k, f"0{args.qubits}b"), dense[k].real) for k in range(dense.shape[0])]
    written = [write_csv(csv_path, ["index", "bits", "amplitude"], rows)]
    mps_path = csv_path.with_suffix(".mps")
    mps_path.write_text(text, encoding="utf-8")
    written.append(mps_path)
    summary = {"norm": mps.norm(), "max_rank": max_rank(mps)}
    if mps.norm() > 0:
        circuit = compile_mps_to_circuit(mps.scaled(1.0 / mps.norm()))
        circ_path = csv_path.with_suffix(".circuit")
        circ_path.write_text(circuit.dumps(), encoding="utf-8")
        written.append(circ_path)
        summary["gates"] = len(circuit)
    if args.plot:
        series = [Series("amplitude", np.arange(dense.shape[0]), dense.real, "scatter")]
        written.append(write_svg(csv_path.with_suffix(".svg"), series, f"feature state at x={args.x:g}", "index", "amplitude"))
    return summary, written


def _cmd_pde(args, csv_path):
    system = pde.assemble(args.qubits)
    exact = pde.solve_classical(system)
    if args.solver == "classical":
        sol = exact
    else:
        sol = pde.solve_variational(
            system, layers=args.layers, seed=rng_stream(args.seed, "pde"), max_iters=args.max_iters, tol=args.tol
        )
    xs = np.linspace(-1.0, 1.0, args.eval_points)
    rows = []
    for x in xs:
        u_exact = pde.interpolant(exact.coefficients, exact.grid, x)
        u_eval = pde.eval_point(sol, x, args.method)
        rows.append((x, u_exact, u_eval, abs(u_eval - u_exact)))
    written = [write_csv(csv_path, ["x", "u_exact", "u_eval", "abs_err"], rows)]
    summary = {
        "solver": args.solver,
        "fidelity": float(abs(np.dot(sol.state, exact.state))),
        "cost": sol.cost,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "max_abs_err": max(r[3] for r in rows),
    }
    if args.solver == "variational":
        written.append(
            write_csv(_sibling(csv_path, "cost"), ["iteration", "cost"], enumerate(sol.history))
        )
    if args.plot:
        mesh = np.linspace(-1.0, 1.0, 257)
        series = [
            Series("FEM interpolant", mesh, [pde.interpolant(exact.coefficients, exact.grid, x) for x in mesh]),
            Series(f"{args.solver} ({args.method})", xs, [r[2] for r in rows], "scatter"),
        ]
        written.append(write_svg(csv_path.with_suffix(".svg"), series, "Poisson solution", "x", "u"))
    if not sol.converged:
        raise NumericalFailure(f"variational solve stopped at cost {sol.cost:.3e}", summary, written)
    return summary, written


_REGRESS_DEFAULTS = {
    "jump": {"qubits": 5, "layers": 3, "epochs": 1500},
    "sine": {"qubits": 5, "layers": 1, "epochs": 300},
    "multistep": {"qubits": 3, "layers": 1, "epochs": 500},
    "spectrum": {"qubits": 3, "layers": 1, "epochs": 1},
}


def _cmd_regress(args, csv_path):
    defaults = _REGRESS_DEFAULTS[args.experiment]
    n = args.qubits or defaults["qubits"]
    layers = args.layers or defaults["layers"]
    epochs = args.epochs or defaults["epochs"]
    if args.lr <= 0:
        raise ValueError("--lr must be positive")

    if args.experiment == "spectrum":
        xs, curves = learning.spectrum_demo(n)
        names = list(curves)
        rows = ([x, *(curves[k][i] for k in names)] for i, x in enumerate(xs))
        written = [write_csv(csv_path, ["x", *names], rows)]
        if args.plot:
            series = [Series(k, xs, curves[k]) for k in names]
            written.append(write_svg(csv_path.with_suffix(".svg"), series, "observable curves", "x", "<O>"))
        return {"sign_changes": {k: learning.sign_changes(v) for k, v in curves.items()}}, written

    rng = rng_stream(args.seed, "regress")
    if args.experiment == "jump":
        report = learning.jump_experiment(rng, n, args.encoding, layers, epochs, args.lr)
    elif args.experiment == "sine":
        report = learning.sine_experiment(rng, n, args.encoding, layers, epochs, args.lr)
    else:
        if args.encoding != "pptnqfe":
            raise ValueError("the multistep experiment is defined for the pptnqfe encoding only")
        report = learning.multistep_experiment(rng, n, epochs, args.lr)

    rows = zip(report.curve_x, report.curve_target, report.curve_model)
    written = [
        write_csv(csv_path, ["x", "y_target", "y_model"], rows),
        write_csv(_sibling(csv_path, "loss"), ["epoch", "loss"], enumerate(report.losses)),
        write_csv(_sibling(csv_path, "data"), ["x", "y"], zip(report.xs, report.ys)),
    ]
    if args.plot:
        series = [
            Series("target", report.curve_x, report.curve_target),
            Series("model", report.curve_x, report.curve_model),
            Series("training data", report.xs, report.ys, "scatter"),
        ]
        written.append(write_svg(csv_path.with_suffix(".svg"), series, f"{args.experiment} ({args.encoding})", "x", "y"))
        written.append(
            write_svg(
                _sibling(csv_path, "loss", ".svg"),
                [Series("MSE", np.arange(len(report.losses)), report.losses)],
                "training loss",
                "epoch",
                "MSE",
            )
        )
    summary = {
        "n_qubits": report.n_qubits,
        "n_params": report.n_params,
        "param_counts": report.param_counts,
        "train_mse": report.train_mse,
        "clean_mse": report.clean_mse,
        "theta": report.theta.tolist() if report.n_params <= 16 else None,
    }
    summary.update({k: np.asarray(v).tolist() for k, v in report.extra.items()})
    return summary, written


def _cmd_classify(args, csv_path):
    if args.lam < 0:
        raise ValueError("--lambda must be non-negative")
    rng = rng_stream(args.seed, "classify")
    data = kernel.gen_half_moons(seed=rng) if args.dataset == "moons" else kernel.gen_three_lines(seed=rng)
    q = args.qubits_per_feature
    freqs = tuple(float(2**j) for j in range(q)) if args.angle_frequencies == "exponential" else tuple(
        float(j + 1) for j in range(q)
    )
    specs = {}
    if args.kernel in ("pptnqfe", "both"):
        specs["pptnqfe"] = kernel.PptnqfeKernel(q)
    if args.kernel in ("angle", "both"):
        specs["angle"] = kernel.AngleKernel(freqs, args.angle_scale)
    report = kernel.classify_experiment(data, specs, args.lam)

    pred = {
        k: (report.scores[k].predictions if k in report.scores else [None] * len(data.labels))
        for k in ("pptnqfe", "angle")
    }
    split = np.array(["train"] * len(data.labels), dtype=object)
    split[data.test] = "test"
    rows = zip(data.points[:, 0], data.points[:, 1], data.labels, split, pred["pptnqfe"], pred["angle"])
    written = [write_csv(csv_path, ["x0", "x1", "label", "split", "pred_pptnqfe", "pred_angle"], rows)]

    dec = {
        k: (report.scores[k].probe_decision if k in report.scores else [None] * len(report.probes))
        for k in ("pptnqfe", "angle")
    }
    probe_rows = zip(report.probes[:, 0], report.probes[:, 1], report.probe_reference, dec["pptnqfe"], dec["angle"])
    written.append(
        write_csv(
            _sibling(csv_path, "probes"),
            ["x0", "x1", "nearest_label", "decision_pptnqfe", "decision_angle"],
            probe_rows,
        )
    )
    if args.plot:
        for name, s in report.scores.items():
            series = [
                Series("pred +1", data.points[s.predictions == 1, 0], data.points[s.predictions == 1, 1], "scatter"),
                Series("pred -1", data.points[s.predictions == -1, 0], data.points[s.predictions == -1, 1], "scatter"),
            ]
            written.append(write_svg(_sibling(csv_path, name, ".svg"), series, f"{args.dataset}: {name}", "x0", "x1"))
    summary = {
        name: {
            "train_accuracy": s.train_accuracy,
            "test_accuracy": s.test_accuracy,
            "probe_flips": s.probe_flips,
            "probe_flips_any": s.probe_flips_any,
            "lambda": s.lam,
        }
        for name, s in report.scores.items()
    }
    return summary, written


_COMMANDS = {
    "basis": _cmd_basis,
    "encode": _cmd_encode,
    "pde": _cmd_pde,
    "regress": _cmd_regress,
    "classify": _cmd_classify,
}


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return v if np.isfinite(v) else str(v)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, Path):
        return str(value)
    return value


def run(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _parse(argv)
    except UsageError as exc:
        sys.stderr.write(f"{exc}\n")
        return EXIT_INVALID

    csv_path, out_dir = _outputs(args.out, args.command)
    meta = {
        "command": args.command,
        "config": {k: v for k, v in vars(args).items() if k != "command"},
        "seed": args.seed,
        "rng": "PCG64(SeedSequence(seed, spawn_key=(component offset,)))",
        "version": _version(),
    }
    start = time.perf_counter()
    code = EXIT_OK
    try:
        summary, written = _COMMANDS[args.command](args, csv_path)
        meta.update(status="ok", summary=summary, outputs=written)
    except NumericalFailure as exc:
        message, summary, written = exc.args
        meta.update(status="numerical_failure", error=message, summary=summary, outputs=written)
        sys.stderr.write(f"numerical failure: {message}\n")
        code = EXIT_NUMERIC
    except learning.TrainingDivergedError as exc:
        meta.update(status="numerical_failure", error=str(exc), losses=exc.losses)
        sys.stderr.write(f"numerical failure: {exc}\n")
        code = EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        meta.update(status="invalid", error=str(exc))
        sys.stderr.write(f"error: {exc}\n")
        code = EXIT_INVALID
    meta["wall_time_s"] = time.perf_counter() - start
    meta["exit_code"] = code
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "run.json").write_text(json.dumps(_jsonable(meta), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        sys.stderr.write(f"cannot write {out_dir / 'run.json'}: {exc}\n")
        return EXIT_INVALID
    return code


def main() -> None:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run())


if __name__ == "__main__":
    main()
