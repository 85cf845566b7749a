"""Command-line entry point.

Exit codes: 0 success, 1 I/O error, 2 bad flags or malformed data,
3 an acceptance check failed (``stats`` bound violated).
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from pydantic import ValidationError

from pi_quant import bench_tasks, error_lab, reporting
from pi_quant.containers import read_dense, read_quantized, write_dense, write_quantized
from pi_quant.errors import AcceptanceError, ConfigurationError, PiQuantError
from pi_quant.models import CliConfig, Distribution, PackMode
from pi_quant.packing import bits_per_parameter, packed_bit_length
from pi_quant.rotation_codec import err_max, precision_config
from pi_quant.settings import settings
from pi_quant.tensor_quant import dequantize_tensor, quantize_tensor

logger = logging.getLogger("pi_quant")

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_ACCEPTANCE = 3

PACK_CHOICES = {"byte": PackMode.BYTE_ALIGNED, "group": PackMode.GROUP_PACKED}
OPTIMIZER_CHOICES = ("sgd", "adam", "pi_adam", "linear_adam")


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _point(text: str) -> tuple[float, float]:
    try:
        x, y = (float(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x,y, got {text!r}") from None
    return x, y


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=settings.seed, help="RNG seed, unsigned 64-bit (default: %(default)s)")
    common.add_argument("--threads", type=int, default=settings.threads, help="worker cap (default: %(default)s)")
    common.add_argument("--format", choices=["csv", "json"], default="csv",
                        help="output format for tables (default: %(default)s)")
    common.add_argument("--out", default=None, help="write the table here instead of stdout")
    common.add_argument("--log-level", default=settings.log_level,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr log level (default: %(default)s)")
    return common


def _subcommand(commands, common: argparse.ArgumentParser, name: str, text: str) -> argparse.ArgumentParser:
    return commands.add_parser(name, parents=[common], help=text, description=text)


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="pi-quant", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    commands = parser.add_subparsers(dest="command", required=True)

    quantize = _subcommand(commands, common, "quantize",
                         "dense .pqtd file to quantized .piqt file; prints a JSON summary "
                         "{elements, bits_per_param, max_err_bound}")
    quantize.add_argument("input", help="dense tensor file (.pqtd)")
    quantize.add_argument("output", help="quantized tensor file (.piqt)")
    quantize.add_argument("--lambda", dest="lam", type=int, default=settings.default_lambda,
                          help="decimal digit budget 1-4 (default: %(default)s)")
    quantize.add_argument("--pack", choices=sorted(PACK_CHOICES), default="group",
                          help="code packing mode (default: %(default)s)")

    dequantize = _subcommand(commands, common, "dequantize",
                         "quantized .piqt file back to a dense .pqtd file; prints {elements}")
    dequantize.add_argument("input", help="quantized tensor file (.piqt)")
    dequantize.add_argument("output", help="dense tensor file (.pqtd)")

    stats = _subcommand(commands, common, "stats",
                         "roundtrip error statistics per lambda; columns "
                         "lambda,dist,n,mean_x,mean_y,max,bound,bound_grid (scaled units)")
    stats.add_argument("--dist", choices=[d.value for d in Distribution], default="uniform",
                       help="sample distribution on [-1,1]^2 (default: %(default)s)")
    stats.add_argument("--n", type=int, default=100_000, help="samples per lambda (default: %(default)s)")
    stats.add_argument("--lambda-list", type=_int_list, default=[1, 2, 3, 4],
                       help="comma-separated lambdas (default: 1,2,3,4)")
    stats.add_argument("--slack", type=float, default=settings.bound_slack,
                       help="pass if mean error <= bound_grid * slack (default: %(default)s)")

    grid = _subcommand(commands, common, "grid",
                         "per-cell error and code density over [-1,1]^2; "
                         "columns cell_x,cell_y,mean_err,density")
    grid.add_argument("--lambda", dest="lam", type=int, default=settings.default_lambda,
                      help="decimal digit budget (default: %(default)s)")
    grid.add_argument("--res", type=int, default=64, help="cells per side, >= 16 (default: %(default)s)")
    grid.add_argument("--subsamples", type=int, default=4, help="sample points per cell side (default: %(default)s)")

    ablation = _subcommand(commands, common, "ablation",
                         "error with the coefficient replaced by 10^-lambda or 3 + pibar; "
                         "columns variant,dist,pibar,mean_error,mean_sq_error")
    ablation.add_argument("--n", type=int, default=100_000, help="samples per distribution (default: %(default)s)")
    ablation.add_argument("--lambda", dest="lam", type=int, default=3, help="digit budget (default: %(default)s)")

    trajectory = _subcommand(commands, common, "trajectory",
                         "samples of the continuous rotation curve; columns theta,x,y "
                         "(theta in radians)")
    trajectory.add_argument("--lambda", dest="lam", type=int, default=settings.default_lambda,
                            help="digit budget fixing the coefficient (default: %(default)s)")
    trajectory.add_argument("--theta-max", type=float, default=None,
                            help="largest angle in radians (default: 2*pi*10^lambda)")
    trajectory.add_argument("--n", type=int, default=10_000, help="sample count, >= 2 (default: %(default)s)")

    himmelblau = _subcommand(commands, common, "himmelblau",
                         "descents on the Himmelblau function; columns "
                         "step,x,y,f,optimizer,start_id")
    himmelblau.add_argument("--optimizer", choices=OPTIMIZER_CHOICES, default="adam")
    himmelblau.add_argument("--lambda", dest="lam", type=int, default=settings.default_lambda,
                            help="digit budget for pi_adam (default: %(default)s)")
    himmelblau.add_argument("--bits", type=int, default=8, help="bits for linear_adam (default: %(default)s)")
    himmelblau.add_argument("--start", type=_point, action="append", default=None,
                            help="start point x,y; repeatable (default: the four standard starts)")
    himmelblau.add_argument("--steps", type=int, default=2000, help="optimizer steps (default: %(default)s)")
    himmelblau.add_argument("--lr", type=float, default=settings.himmelblau_lr,
                            help="learning rate (default: %(default)s)")

    train = _subcommand(commands, common, "train-toy",
                         "toy MLP training curves; columns epoch,loss,optimizer,lambda,seed")
    train.add_argument("--task", choices=bench_tasks.TASKS, default="regression")
    train.add_argument("--optimizer", choices=OPTIMIZER_CHOICES, default="adam")
    train.add_argument("--lambda", dest="lam", type=int, default=settings.default_lambda,
                       help="digit budget for pi_adam (default: %(default)s)")
    train.add_argument("--bits", type=int, default=8, help="bits for linear_adam (default: %(default)s)")
    train.add_argument("--epochs", type=int, default=200, help="training epochs (default: %(default)s)")
    train.add_argument("--runs", type=int, default=1, help="consecutive seeds to train (default: %(default)s)")
    train.add_argument("--lr", type=float, default=settings.mlp_lr, help="learning rate (default: %(default)s)")
    return parser


def _validate(args: argparse.Namespace) -> CliConfig:
    try:
        return CliConfig(
            subcommand=args.command,
            lambda_=getattr(args, "lam", settings.default_lambda),
            seed=args.seed,
            input=getattr(args, "input", None),
            output=getattr(args, "output", None) or args.out,
            format=args.format,
            threads=args.threads,
        )
    except ValidationError as exc:
        raise ConfigurationError(str(exc)) from exc


def _check_paths(config: CliConfig) -> None:
    if config.input and not Path(config.input).is_file():
        raise FileNotFoundError(f"input file not found: {config.input}")
    if config.output and not Path(config.output).resolve().parent.is_dir():
        raise FileNotFoundError(f"output directory does not exist: {Path(config.output).parent}")


def _summary(name: str, payload: dict) -> None:
    sys.stdout.write(reporting.json_text(name, payload))


def cmd_quantize(args, config: CliConfig) -> int:
    cfg = precision_config(config.lambda_)
    mode = PACK_CHOICES[args.pack]
    tensor = read_dense(config.input)
    q = quantize_tensor(tensor, cfg, mode, workers=config.threads)
    write_quantized(config.output, q)
    bits = bits_per_parameter(packed_bit_length(q.codes.size, cfg.lambda_, mode), q.original_len)
    _summary("quantize_summary", {
        "elements": q.original_len,
        "bits_per_param": bits,
        "max_err_bound": err_max(cfg) * q.scale_w,
    })
    return EXIT_OK


def cmd_dequantize(args, config: CliConfig) -> int:
    q = read_quantized(config.input)
    write_dense(config.output, dequantize_tensor(q))
    _summary("dequantize_summary", {"elements": q.original_len})
    return EXIT_OK


def cmd_stats(args, config: CliConfig) -> int:
    if not args.lambda_list:
        raise ConfigurationError("--lambda-list is empty")
    results = [
        error_lab.empirical_error_stats(Distribution(args.dist), args.n, precision_config(lam), config.seed)
        for lam in args.lambda_list
    ]
    header, rows = reporting.stats_rows(results)
    extra = {}
    if len(results) > 1:
        extra["slope"] = error_lab.error_slope(results)
        logger.info("log10 mean error slope over lambda: %.4f", extra["slope"])
    reporting.emit(reporting.render("stats", header, rows, config.format, extra), args.out)

    failed = []
    for s in results:
        passed = error_lab.check_bound(s, args.slack)
        sys.stderr.write(f"lambda={s.lambda_} mean={s.mean_abs_err:.6g} limit={s.bound_grid * args.slack:.6g} "
                         f"{'PASS' if passed else 'FAIL'}\n")
        if not passed:
            failed.append(s.lambda_)
    if failed:
        raise AcceptanceError(f"mean error above bound for lambda {failed}")
    return EXIT_OK


def cmd_grid(args, config: CliConfig) -> int:
    report = error_lab.error_grid(precision_config(config.lambda_), args.res, args.subsamples)
    header, rows = reporting.grid_rows(report)
    extra = {"lambda": report.lambda_, "code_count_in_domain": report.code_count_in_domain,
             "code_stride": report.code_stride}
    reporting.emit(reporting.render("grid", header, rows, config.format, extra), args.out)
    return EXIT_OK


def cmd_ablation(args, config: CliConfig) -> int:
    table = error_lab.pibar_ablation(args.n, config.seed, lam=config.lambda_)
    header, rows = reporting.ablation_rows(table)
    reporting.emit(reporting.render("ablation", header, rows, config.format, {"lambda": config.lambda_}), args.out)
    return EXIT_OK


def cmd_trajectory(args, config: CliConfig) -> int:
    cfg = precision_config(config.lambda_)
    theta_max = args.theta_max if args.theta_max is not None else 2.0 * math.pi * cfg.digit_modulus
    samples = error_lab.trajectory_samples(theta_max, args.n, cfg)
    logger.info("trajectory covers %.4f of the disk cells", error_lab.trajectory_coverage(samples))
    header, rows = reporting.trajectory_rows(samples)
    reporting.emit(reporting.render("trajectory", header, rows, config.format), args.out)
    return EXIT_OK


def cmd_himmelblau(args, config: CliConfig) -> int:
    starts = args.start or bench_tasks.DEFAULT_STARTS
    runs = bench_tasks.run_descents(args.optimizer, args.steps, starts, lr=args.lr, lam=config.lambda_,
                                    bits=args.bits, workers=config.threads)
    for run in runs:
        logger.info("start %d %s: final f=%.6g%s", run.start_id, run.start, run.final_f,
                    " (diverged)" if run.diverged else "")
    header, rows = reporting.descent_rows(runs)
    reporting.emit(reporting.render("himmelblau", header, rows, config.format), args.out)
    return EXIT_OK


def cmd_train_toy(args, config: CliConfig) -> int:
    if args.runs < 1:
        raise ConfigurationError("--runs must be >= 1")
    seeds = [config.seed + offset for offset in range(args.runs)]
    runs = bench_tasks.train_toy_seeds(args.task, args.optimizer, args.epochs, seeds, workers=config.threads,
                                       lr=args.lr, lam=config.lambda_, bits=args.bits)
    header, rows = reporting.training_rows(runs)
    reporting.emit(reporting.render("train_toy", header, rows, config.format), args.out)
    return EXIT_OK


COMMANDS = {
    "quantize": cmd_quantize,
    "dequantize": cmd_dequantize,
    "stats": cmd_stats,
    "grid": cmd_grid,
    "ablation": cmd_ablation,
    "trajectory": cmd_trajectory,
    "himmelblau": cmd_himmelblau,
    "train-toy": cmd_train_toy,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.basicConfig(stream=sys.stderr, level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = _validate(args)
        _check_paths(config)
        return COMMANDS[args.command](args, config)
    except AcceptanceError as exc:
        logger.error("%s", exc)
        return EXIT_ACCEPTANCE
    except PiQuantError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_IO
