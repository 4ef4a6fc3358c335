"""Command-line surface for the convergence experiments.

Subcommands mirror the studies in :mod:`rescomp.experiments` plus a
self-check of the kernel evaluators.  Every run is a pure function of its
flags: the full resolved configuration (including the master seed) is
embedded in the output, and rerunning a command reproduces the output file
byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .experiments import (
    ExperimentResult,
    ScanSpec,
    Topology,
    convergence_scan,
    cross_term_probe,
    deep_size_scan,
    sparse_rf_experiment,
    sparsity_scan,
)
from .kernels import (
    Activation,
    KernelArgs,
    QuadratureRule,
    kernel_closed_form,
    kernel_quadrature,
)

PAPER_DEFAULTS = {
    "n": 200,
    "d": 100,
    "t": 10,
    "m": 2,
    "sparsity": 0.8,
    "leak": 0.5,
    "layers": 2,
}


class ValidationError(ValueError):
    """A flag value failed validation (exit code 2)."""


def _positive(name: str, value: float) -> float:
    if value <= 0:
        raise ValidationError(f"{name}: must be positive, got {value}")
    return value


def parse_grid(name: str, text: str) -> tuple[float, ...]:
    """Grid spec: a float, a comma list, or lin:LO:HI:K / log:LO:HI:K."""
    text = text.strip()
    try:
        if text.startswith(("lin:", "log:")):
            mode, lo, hi, count = text.split(":")
            lo, hi, count = float(lo), float(hi), int(count)
            if count < 1:
                raise ValidationError(f"{name}: grid needs at least one point")
            _positive(name, lo)
            _positive(name, hi)
            if count == 1:
                return (lo,)
            space = np.linspace if mode == "lin" else np.geomspace
            return tuple(float(v) for v in space(lo, hi, count))
        values = tuple(float(v) for v in text.split(","))
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse grid spec {text!r}") from exc
    for v in values:
        _positive(name, v)
    return values


def _int_list(name: str, text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse integer list {text!r}") from exc
    for v in values:
        if v < 1:
            raise ValidationError(f"{name}: entries must be >= 1, got {v}")
    return values


def _float_list(name: str, text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ValidationError(f"{name}: cannot parse float list {text!r}") from exc


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _render(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def emit(result: ExperimentResult, fmt: str, path: str) -> None:
    """Write a result as CSV (one row per grid point) or JSON."""
    if fmt not in ("csv", "json"):
        raise ValidationError(f"--format: unknown format {fmt!r}")
    if result.n_rows == 0:
        raise ValidationError("result has no rows, nothing to write")
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(result.to_dict(), fh, indent=2)
            fh.write("\n")
        return
    header = list(result.axes) + list(result.values) + ["diverged_fraction"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(result.n_rows):
            row = [_render(result.axes[k][i]) for k in result.axes]
            row += [_render(result.values[k][i]) for k in result.values]
            row.append(_render(result.diverged_fraction[i]))
            writer.writerow(row)


def parse_result(path: str) -> ExperimentResult:
    """Read back a JSON result file."""
    with open(path, encoding="utf-8") as fh:
        return ExperimentResult.from_dict(json.load(fh))


# --------------------------------------------------------------------------
# argument plumbing
# --------------------------------------------------------------------------

def _add_common(parser: argparse.ArgumentParser, needs_output: bool = True) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--reps", type=int, default=100, help="Monte-Carlo repetitions")
    parser.add_argument("--activation", choices=[a.value for a in Activation],
                        default="erf")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: RESCOMP_WORKERS or 1)")
    parser.add_argument("--paper-defaults", action="store_true",
                        help="load the reference operating point "
                             "(N=200, d=100, T=10, M=2, s=0.8, a=0.5, two layers)")
    if needs_output:
        parser.add_argument("--output", "-o", required=True, help="output file path")
        parser.add_argument("--format", choices=["csv", "json"], default="csv")


def _resolve_workers(args) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise ValidationError(f"--workers: must be >= 1, got {args.workers}")
        return args.workers
    env = os.environ.get("RESCOMP_WORKERS", "")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ValidationError(f"RESCOMP_WORKERS: not an integer: {env!r}") from exc
        if value < 1:
            raise ValidationError(f"RESCOMP_WORKERS: must be >= 1, got {value}")
        return value
    return 1


def _scan_dims(args) -> dict:
    dims = {}
    for name in ("n", "d", "t", "m"):
        value = getattr(args, name)
        if value is None:
            value = PAPER_DEFAULTS[name] if args.paper_defaults else DEFAULT_DIMS[name]
        if value < 1:
            raise ValidationError(f"--{name}: must be >= 1, got {value}")
        dims[name] = value
    return dims


DEFAULT_DIMS = {"n": 200, "d": 100, "t": 10, "m": 2}


def _topology(args, dims) -> Topology:
    sparsity = args.sparsity
    leak = args.leak
    layers = args.layers
    if args.paper_defaults:
        if sparsity == -1.0:
            sparsity = PAPER_DEFAULTS["sparsity"]
        if leak == -1.0:
            leak = PAPER_DEFAULTS["leak"]
        if layers == -1:
            layers = PAPER_DEFAULTS["layers"]
    for name, value in (("--sparsity", sparsity), ("--leak", leak), ("--layers", layers)):
        if value in (-1.0, -1):
            raise ValidationError(f"{name}: needs a value (or pass --paper-defaults)")
    chosen = [name for name, value in
              (("--sparsity", sparsity), ("--leak", leak), ("--layers", layers))
              if value is not None]
    if len(chosen) > 1:
        raise ValidationError(f"{' and '.join(chosen)}: pick a single topology variant")
    if sparsity is not None:
        if not 0.0 < sparsity <= 1.0:
            raise ValidationError(f"--sparsity: must lie in (0, 1], got {sparsity}")
        return Topology.sparse(sparsity)
    if leak is not None:
        if not 0.0 <= leak <= 1.0:
            raise ValidationError(f"--leak: must lie in [0, 1], got {leak}")
        return Topology.leaky(leak)
    if layers is not None:
        if layers < 1:
            raise ValidationError(f"--layers: must be >= 1, got {layers}")
        return Topology.deep((dims["n"],) * layers)
    return Topology.vanilla()


def _build_spec(args, topology: Topology, dims,
                sigma_r_grid, sigma_i_grid) -> ScanSpec:
    if args.reps < 1:
        raise ValidationError(f"--reps: must be >= 1, got {args.reps}")
    if args.seed < 0:
        raise ValidationError(f"--seed: must be >= 0, got {args.seed}")
    try:
        return ScanSpec(
            topology=topology,
            activation=Activation(args.activation),
            sigma_r_grid=tuple(sigma_r_grid),
            sigma_i_grid=tuple(sigma_i_grid),
            n=dims["n"], t=dims["t"], m=dims["m"], d=dims["d"],
            reps=args.reps, master_seed=args.seed,
        )
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def _finish(result: ExperimentResult, args, run_config: dict) -> int:
    result.spec["cli"] = run_config
    emit(result, args.format, args.output)
    print(f"wrote {result.n_rows} rows to {args.output}")
    return 0


def _run_config(args, subcommand: str) -> dict:
    skip = {"func"}
    config = {"subcommand": subcommand}
    for key in sorted(vars(args)):
        if key in skip:
            continue
        value = getattr(args, key)
        config[key.replace("_", "-")] = value
    return config


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _cmd_convergence(args) -> int:
    dims = _scan_dims(args)
    topology = _topology(args, dims)
    sigma_r = parse_grid("--sigma-r", args.sigma_r)
    sigma_i = parse_grid("--sigma-i", args.sigma_i)
    spec = _build_spec(args, topology, dims, sigma_r, sigma_i)
    result = convergence_scan(spec, workers=_resolve_workers(args))
    return _finish(result, args, _run_config(args, "convergence"))


def _cmd_sparsity(args) -> int:
    dims = _scan_dims(args)
    sigma_r = parse_grid("--sigma-r", args.sigma_r)
    sigma_i = parse_grid("--sigma-i", args.sigma_i)
    n_list = _int_list("--n-list", args.n_list)
    s_list = _float_list("--s-list", args.s_list)
    for s in s_list:
        if not 0.0 < s <= 1.0:
            raise ValidationError(f"--s-list: entries must lie in (0, 1], got {s}")
    if 1.0 not in s_list:
        raise ValidationError("--s-list: must include the dense reference 1.0")
    base = PAPER_DEFAULTS["sparsity"] if args.paper_defaults else 0.5
    spec = _build_spec(args, Topology.sparse(base), dims, sigma_r, sigma_i)
    result, thresholds = sparsity_scan(n_list, s_list, spec,
                                       workers=_resolve_workers(args))
    for n in n_list:
        print(f"threshold(n={n}) = {_render(thresholds[n])}")
    return _finish(result, args, _run_config(args, "sparsity"))


def _cmd_deep_sizes(args) -> int:
    dims = _scan_dims(args)
    sigma_r = parse_grid("--sigma-r", args.sigma_r)
    sigma_i = parse_grid("--sigma-i", args.sigma_i)
    if args.budget < 2:
        raise ValidationError(f"--budget: must be >= 2, got {args.budget}")
    n1_list = _int_list("--n1-list", args.n1_list)
    for n1 in n1_list:
        if n1 * n1 >= args.budget:
            raise ValidationError(f"--n1-list: n1={n1} exceeds --budget {args.budget}")
    topology = Topology.deep((dims["n"], dims["n"]))
    spec = _build_spec(args, topology, dims, sigma_r, sigma_i)
    result = deep_size_scan(args.budget, n1_list, spec,
                            workers=_resolve_workers(args))
    return _finish(result, args, _run_config(args, "deep-sizes"))


def _cmd_cross_terms(args) -> int:
    dims = _scan_dims(args)
    sigma_r = parse_grid("--sigma-r", args.sigma_r)
    sigma_i = parse_grid("--sigma-i", args.sigma_i)
    leak = args.leak
    if leak is None:
        leak = PAPER_DEFAULTS["leak"] if args.paper_defaults else 0.5
    if not 0.0 <= leak <= 1.0:
        raise ValidationError(f"--leak: must lie in [0, 1], got {leak}")
    spec = _build_spec(args, Topology.leaky(leak), dims, sigma_r, sigma_i)
    result = cross_term_probe(spec)
    return _finish(result, args, _run_config(args, "cross-terms"))


def _cmd_sparse_rf(args) -> int:
    if args.reps < 1:
        raise ValidationError(f"--reps: must be >= 1, got {args.reps}")
    if args.seed < 0:
        raise ValidationError(f"--seed: must be >= 0, got {args.seed}")
    d_list = _int_list("--d-list", args.d_list)
    n_list = _int_list("--n-list", args.n_list)
    if not 0.0 < args.sparsity <= 1.0:
        raise ValidationError(f"--sparsity: must lie in (0, 1], got {args.sparsity}")
    result = sparse_rf_experiment(
        d_list, n_list, args.sparsity, args.reps,
        activation=Activation(args.activation), master_seed=args.seed,
    )
    return _finish(result, args, _run_config(args, "sparse-rf"))


def _cmd_kernel_check(args) -> int:
    if args.samples < 1:
        raise ValidationError(f"--samples: must be >= 1, got {args.samples}")
    if args.order < 2:
        raise ValidationError(f"--order: must be >= 2, got {args.order}")
    _positive("--norm-max", args.norm_max)
    _positive("--tol", args.tol)
    rule = QuadratureRule.gauss_hermite(args.order)
    rng = np.random.default_rng(args.seed)
    overall = 0.0
    for activation in Activation:
        worst = 0.0
        for _ in range(args.samples):
            nu = rng.uniform(0.0, args.norm_max)
            nv = rng.uniform(0.0, args.norm_max)
            uv = rng.uniform(-1.0, 1.0) * np.sqrt(nu * nv)
            kernel_args = KernelArgs(nu, nv, uv)
            diff = abs(
                kernel_closed_form(activation, kernel_args)
                - kernel_quadrature(activation, kernel_args, rule)
            )
            worst = max(worst, diff)
        print(f"{activation.value}: max |closed-form - quadrature| = {worst:.3e}")
        overall = max(overall, worst)
    print(f"overall max discrepancy = {overall:.3e} (tolerance {args.tol:g})")
    return 0 if overall <= args.tol else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rescomp",
        description="reservoir-versus-kernel convergence experiments",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    conv = sub.add_parser("convergence", help="metric over a (sigma_r, sigma_i) grid")
    conv.add_argument("--sigma-r", default="lin:0.04:2:25",
                      help="grid spec: FLOAT, comma list, lin:LO:HI:K or log:LO:HI:K")
    conv.add_argument("--sigma-i", default="lin:0.04:2:25")
    for name in ("n", "d", "t", "m"):
        conv.add_argument(f"--{name}", type=int, default=None)
    conv.add_argument("--sparsity", type=float, nargs="?", const=-1.0, default=None,
                      help="sparse topology (value, or bare flag with --paper-defaults)")
    conv.add_argument("--leak", type=float, nargs="?", const=-1.0, default=None,
                      help="leaky topology")
    conv.add_argument("--layers", type=int, nargs="?", const=-1, default=None,
                      help="deep topology with this many equal layers")
    _add_common(conv)
    conv.set_defaults(func=_cmd_convergence)

    spar = sub.add_parser("sparsity", help="metric versus sparsity and size")
    spar.add_argument("--sigma-r", default="1.0")
    spar.add_argument("--sigma-i", default="1.0")
    for name in ("n", "d", "t", "m"):
        spar.add_argument(f"--{name}", type=int, default=None)
    spar.add_argument("--n-list", default="100,400,1000")
    spar.add_argument("--s-list", default="0.01,0.02,0.05,0.1,0.2,0.5,1.0")
    _add_common(spar)
    spar.set_defaults(func=_cmd_sparsity)

    deep = sub.add_parser("deep-sizes", help="two-layer size allocation scan")
    deep.add_argument("--sigma-r", default="1.0")
    deep.add_argument("--sigma-i", default="1.0")
    for name in ("n", "d", "t", "m"):
        deep.add_argument(f"--{name}", type=int, default=None)
    deep.add_argument("--budget", type=int, default=2 * 200 * 200,
                      help="quadratic cost budget n1^2 + n2^2")
    deep.add_argument("--n1-list", default="60,100,140,170,190,200,210,225,240,270")
    _add_common(deep)
    deep.set_defaults(func=_cmd_deep_sizes)

    cross = sub.add_parser("cross-terms", help="size of terms dropped by the leaky limit")
    cross.add_argument("--sigma-r", default="1.0")
    cross.add_argument("--sigma-i", default="1.0")
    for name in ("n", "d", "t", "m"):
        cross.add_argument(f"--{name}", type=int, default=None)
    cross.add_argument("--leak", type=float, default=None)
    _add_common(cross)
    cross.set_defaults(func=_cmd_cross_terms)

    rf = sub.add_parser("sparse-rf", help="random-feature error, dense vs sparse")
    rf.add_argument("--d-list", default="4,16,64")
    rf.add_argument("--n-list", default=",".join(str(2 ** k) for k in range(6, 14)))
    rf.add_argument("--sparsity", type=float, default=0.1)
    _add_common(rf)
    rf.set_defaults(func=_cmd_sparse_rf)

    check = sub.add_parser("kernel-check", help="closed forms versus quadrature")
    check.add_argument("--samples", type=int, default=1000)
    check.add_argument("--order", type=int, default=100)
    check.add_argument("--tol", type=float, default=1e-8)
    check.add_argument("--norm-max", type=float, default=10.0)
    check.add_argument("--seed", type=int, default=0)
    check.set_defaults(func=_cmd_kernel_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
