"""Command-line front end: benchmarks, optimization demos, decomposition
utilities, and FLOP-table emission, all as CSV.

Exit codes: 0 success, 2 validation error, 3 numerical failure. The
``--threads`` flag pins the BLAS pool around each timed section through
threadpoolctl; the sequential reflection path is always timed on one
thread, and both settings appear in the output rows.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


@dataclass(frozen=True)
class BenchConfig:
    """Validated benchmark settings shared by the timing commands."""

    sizes: tuple
    l_fracs: tuple
    batch: int
    trials: int
    warmup: int
    seed: int
    threads: int

    def __post_init__(self):
        if self.trials < 3:
            raise ValueError(f"need at least 3 trials, got {self.trials}")
        if list(self.sizes) != sorted(self.sizes) or len(self.sizes) == 0:
            raise ValueError("sizes must be a nonempty ascending list")
        if any(n < 1 for n in self.sizes) or self.batch < 1 or self.warmup < 0:
            raise ValueError("dimensions, batch and warmup must be positive")
        if any(not 0.0 < f <= 1.0 for f in self.l_fracs):
            raise ValueError("l-frac values must be in (0, 1]")


def _fmt(value: float) -> str:
    return f"{value:.17g}"


def _write_csv(out, header, rows) -> None:
    def emit(fh):
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(c) if isinstance(c, (int, str)) else _fmt(c)
                              for c in row) + "\n")

    if out is None or out == "-":
        emit(sys.stdout)
    else:
        with open(out, "w", encoding="ascii", newline="\n") as fh:
            emit(fh)


def _time_gated(fn, check, trials, warmup):
    """Median/mean/stderr of wall-clock nanoseconds over gated trials.

    Every trial's result must pass ``check``; timing an incorrect result is
    not reported, it is an error.
    """
    import numpy as np

    for _ in range(warmup):
        check(fn())
    samples = np.zeros(trials)
    for i in range(trials):
        start = time.perf_counter_ns()
        result = fn()
        elapsed = time.perf_counter_ns() - start
        check(result)
        samples[i] = elapsed
    mean = float(np.mean(samples))
    stderr = float(np.std(samples, ddof=1) / np.sqrt(trials))
    median = float(np.median(samples))
    return mean, stderr, median


def _limit_blas(threads: int):
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=threads)


def cmd_bench_param(config: BenchConfig, out) -> int:
    """Time dense materialization of an N x N orthogonal matrix through the
    compact-WY factors (L = N), the matrix exponential, and the Cayley map,
    on standard-normal inputs. Each timed result is orthogonality-gated."""
    import numpy as np

    from . import cwy, linalg
    from .errors import NumericalContractError
    from .householder import HouseholderStack

    rows = []
    rng = np.random.default_rng(config.seed)
    for n in config.sizes:
        gate_tol = 1e-10 * n

        def gate(q, n=n, tol=gate_tol):
            residual = np.linalg.norm(q.T @ q - np.eye(n))
            if residual > tol:
                raise NumericalContractError(
                    f"orthogonality gate failed at n={n}: {residual:.3e}"
                )

        vectors = rng.standard_normal((n, n))
        skew = linalg.SkewParam.random(n, rng)
        methods = (
            ("cwy", lambda v=vectors: cwy.materialize(
                cwy.build_factors(HouseholderStack(v)))),
            ("exp", lambda a=skew: linalg.matrix_exp(a)),
            ("cayley", lambda a=skew: linalg.cayley(a)),
        )
        with _limit_blas(config.threads):
            for name, fn in methods:
                mean, stderr, median = _time_gated(fn, gate, config.trials,
                                                   config.warmup)
                rows.append((name, n, mean, stderr, median, config.threads))
    _write_csv(out, ("method", "n", "mean_ns", "stderr_ns", "median_ns", "threads"),
               rows)
    return EXIT_OK


def cmd_bench_apply(config: BenchConfig, out) -> int:
    """Time the batched factored apply against the sequential
    reflection-by-reflection apply on identical stacks and inputs.

    The two paths are asserted numerically equivalent on every trial
    (max-abs below 1e-11 * L). The factored path runs on the configured
    BLAS pool, the inherently sequential path on one thread; both thread
    settings are recorded in the output.
    """
    import numpy as np

    from . import cwy
    from .errors import NumericalContractError
    from .householder import HouseholderStack, apply_stack

    rows = []
    rng = np.random.default_rng(config.seed)
    for n in config.sizes:
        for frac in config.l_fracs:
            l = max(1, min(n, round(n * frac)))
            stack = HouseholderStack(rng.standard_normal((l, n)))
            x = rng.standard_normal((n, config.batch))
            factors = cwy.build_factors(stack)
            reference = apply_stack(stack, x)
            tol = 1e-11 * l

            def gate(result, reference=reference, tol=tol, n=n, l=l):
                diff = float(np.max(np.abs(result - reference)))
                if diff > tol:
                    raise NumericalContractError(
                        f"equivalence gate failed at n={n}, l={l}: {diff:.3e}"
                    )

            with _limit_blas(config.threads):
                mean, stderr, median = _time_gated(
                    lambda: cwy.apply(factors, x), gate, config.trials,
                    config.warmup)
            rows.append(("cwy", n, l, config.batch, mean, stderr, median,
                         config.threads))
            with _limit_blas(1):
                mean, stderr, median = _time_gated(
                    lambda: apply_stack(stack, x), gate, config.trials,
                    config.warmup)
            rows.append(("hr", n, l, config.batch, mean, stderr, median, 1))
    _write_csv(out, ("method", "n", "l", "batch", "mean_ns", "stderr_ns",
                     "median_ns", "threads"), rows)
    return EXIT_OK


def cmd_demo(args) -> int:
    """Run a desk-scale optimization demo and write its history CSV."""
    import numpy as np

    from . import optim

    rng = np.random.default_rng(args.seed)
    if args.task == "procrustes_on":
        n = args.n
        stack = optim.random_stack(n, n, rng)
        a = rng.standard_normal((n, n))
        a /= np.linalg.norm(a, 2)
        planted, _ = np.linalg.qr(rng.standard_normal((n, n)))
        if not np.isclose(np.linalg.det(planted), -1.0 if n % 2 else 1.0):
            planted[:, 0] *= -1.0
        objective = optim.procrustes_objective(a, planted @ a,
                                               noise_sigma=args.noise_sigma,
                                               seed=args.seed + 1)
        history = optim.run(optim.SgdState(stack), objective,
                            max_iters=args.iters, grad_tol=args.grad_tol)
    else:  # procrustes_st
        n, m = args.n, args.m
        if not m < n:
            print(f"error: need m < n, got n={n}, m={m}", file=sys.stderr)
            return EXIT_VALIDATION
        stack = optim.random_stack(n, m, rng)
        target = rng.standard_normal((n, m))
        target /= np.linalg.norm(target, 2)
        objective = optim.trace_objective(target, noise_sigma=args.noise_sigma,
                                          seed=args.seed + 1)
        history = optim.stiefel_run(optim.SgdState(stack), objective,
                                    max_iters=args.iters, grad_tol=args.grad_tol)
    if args.out is None or args.out == "-":
        rows = [(k, _fmt(o), _fmt(s), _fmt(b), _fmt(mn))
                for k, o, s, b, mn in history.rows()]
        _write_csv(None, optim.CSV_COLUMNS, rows)
    else:
        history.write_csv(args.out)
    return EXIT_OK


def cmd_decompose(args) -> int:
    """Decompose a matrix file into reflection vectors, verifying the
    round-trip before anything is written."""
    import numpy as np

    from . import cwy, tcwy
    from .linalg import read_matrix

    matrix = read_matrix(args.input)
    if args.mode == "orthogonal":
        stack = cwy.init_from_orthogonal(matrix)
        rebuilt = cwy.materialize(cwy.build_factors(stack))
        tol = 1e-9 * matrix.shape[0]
    else:
        stack = tcwy.decompose_stiefel(matrix)
        rebuilt = tcwy.gamma(stack)
        tol = 1e-9 * matrix.shape[1]
    err = float(np.linalg.norm(rebuilt - matrix))
    if err > tol:
        print(f"error: round-trip residual {err:.3e} exceeds {tol:.1e}",
              file=sys.stderr)
        return EXIT_NUMERICAL
    with open(args.out, "w", encoding="ascii", newline="\n") as fh:
        for v in stack.vectors:
            fh.write(" ".join(_fmt(c) for c in v) + "\n")
    return EXIT_OK


def cmd_flops(args) -> int:
    """Emit the operation-count grid for every column-orthonormal method."""
    from . import flops

    rows = [(e.method, e.dims["n"], e.dims["m"], str(e.exact), e.flops)
            for e in flops.stiefel_grid(args.sizes, args.l_frac)]
    _write_csv(args.out, ("method", "n", "m", "flops_exact", "flops"), rows)
    return EXIT_OK


def _add_bench_flags(parser):
    parser.add_argument("--sizes", type=int, nargs="+", default=[64, 128, 256])
    parser.add_argument("--l-frac", type=float, nargs="+", default=[1.0],
                        dest="l_frac", help="reflection counts as fractions of n")
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--trials", type=int, default=10)
    parser.add_argument("--warmup", type=int, default=2)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--out", default=None, help="CSV path (default stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cwykit",
        description="Benchmarks, demos and utilities for reflection-product "
                    "orthogonal and Stiefel parametrizations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench-param", help="time dense orthogonal materialization")
    _add_bench_flags(p)

    p = sub.add_parser("bench-apply", help="time factored vs sequential apply")
    _add_bench_flags(p)

    p = sub.add_parser("demo", help="run an optimization demo")
    p.add_argument("--task", choices=("procrustes_on", "procrustes_st"),
                   default="procrustes_on")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--iters", type=int, default=20000)
    p.add_argument("--grad-tol", type=float, default=1e-6, dest="grad_tol")
    p.add_argument("--noise-sigma", type=float, default=0.0, dest="noise_sigma")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)

    p = sub.add_parser("decompose", help="factor a matrix file into reflections")
    p.add_argument("input", help="matrix in the 'rows cols' text format")
    p.add_argument("--mode", choices=("orthogonal", "stiefel"), default="orthogonal")
    p.add_argument("--out", required=True, help="output file, one vector per line")

    p = sub.add_parser("flops", help="emit the operation-count grid")
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128, 256, 512, 1024])
    p.add_argument("--l-frac", type=float, nargs="+",
                   default=[0.125, 0.25, 0.5, 1.0], dest="l_frac")
    p.add_argument("--out", default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    from .errors import NumericalContractError, ShapeMismatch

    try:
        if args.command in ("bench-param", "bench-apply"):
            config = BenchConfig(sizes=tuple(args.sizes),
                                 l_fracs=tuple(args.l_frac),
                                 batch=args.batch, trials=args.trials,
                                 warmup=args.warmup, seed=args.seed,
                                 threads=args.threads)
            if args.command == "bench-param":
                return cmd_bench_param(config, args.out)
            return cmd_bench_apply(config, args.out)
        if args.command == "demo":
            return cmd_demo(args)
        if args.command == "decompose":
            return cmd_decompose(args)
        return cmd_flops(args)
    except ShapeMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalContractError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
