#!/usr/bin/env python3

# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Command-line entry point for decentralized online optimization experiments."""

import argparse
import logging
import pathlib
import sys
import typing

import harness
from curvature import full_regret_bound, network_error_bound, tuned_eta
from exceptions import ConfigInvalidError, GeodesicGossipError
from experiment_state import ExperimentConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

PARAM_ALIASES = {
    "s": "consensus_step",
    "eta": "eta_scale",
    "T": "horizon",
    "n": "n_agents",
    "k": "ring_degree",
}


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser that rejects bad usage with the configuration exit code."""

    def error(self, message: str) -> typing.NoReturn:
        """Print the usage and exit.

        Args:
            message: the parse error.
        """
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _key_value(text: str) -> typing.Tuple[str, str]:
    """Split a `key=value` argument.

    Args:
        text: the argument.

    Returns:
        the key, resolved through the aliases, and the raw value.

    Raises:
        ArgumentTypeError: if there is no `=`.
    """
    key, separator, value = text.partition("=")
    if not separator or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    key = key.strip()
    return PARAM_ALIASES.get(key, key), value.strip()


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser.

    Returns:
        the parser.
    """
    parser = _ArgumentParser(
        prog="geodesic-gossip", description="Decentralized online Riemannian optimization"
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="logging threshold",
    )
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_ArgumentParser)

    def add_command(name: str, help_text: str) -> argparse.ArgumentParser:
        command = commands.add_parser(name, help=help_text)
        command.add_argument("--config", type=pathlib.Path, required=True, help="config file")
        command.add_argument(
            "--override",
            type=_key_value,
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="replace a configuration value",
        )
        return command

    run = add_command("run", "run an experiment and write its CSV")
    run.add_argument("--seed", type=int, default=None, help="master seed")
    run.add_argument("--out", default=None, help="output CSV path")
    add_command("validate", "check the configuration assumptions only")
    sweep = add_command("sweep", "run one experiment per parameter value")
    sweep.add_argument("--seed", type=int, default=None, help="master seed")
    sweep.add_argument("--out", default=None, help="output CSV path stem")
    sweep.add_argument("--param", type=_key_value, required=True, metavar="KEY=V1,V2,...")
    add_command("constants", "print the derived constants")
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    """Load the configuration with the command-line overrides.

    Args:
        args: parsed arguments.

    Returns:
        the configuration.
    """
    overrides = dict(args.override)
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output"] = args.out
    return ExperimentConfig.from_file(args.config, overrides)


def _run(args: argparse.Namespace) -> None:
    """Run an experiment.

    Args:
        args: parsed arguments.
    """
    cfg = _load(args)
    trace = harness.run_experiment(cfg)
    path = harness.emit_csv(trace, cfg.output_path(f"{args.config.stem}.csv"))
    print(path)


def _validate(args: argparse.Namespace) -> None:
    """Check the assumptions of a configuration.

    Args:
        args: parsed arguments.
    """
    cfg = _load(args)
    setup = cfg.check_assumptions()
    print(
        f"ok: {cfg.manifold.value}({cfg.dim}), n={cfg.n_agents}, "
        f"sigma2={setup.matrix.sigma2:.6f}, feasible radius={setup.feasible.radius:.6f}"
    )


def _sweep(args: argparse.Namespace) -> None:
    """Run a parameter sweep.

    Args:
        args: parsed arguments.

    Raises:
        ConfigInvalidError: if no values are given.
    """
    cfg = _load(args)
    key, raw_values = args.param
    values = [value.strip() for value in raw_values.split(",") if value.strip()]
    if not values:
        raise ConfigInvalidError(f"no values to sweep for {key}")
    for path in harness.sweep(cfg, key, values, stem=args.config.stem):
        print(path)


def _constants(args: argparse.Namespace) -> None:
    """Print the derived constants and the bounds they give.

    Args:
        args: parsed arguments.
    """
    cfg = _load(args)
    setup = cfg.check_assumptions()
    constants = harness.derive_constants(cfg, setup)
    for key, value in constants.dict().items():
        print(f"{key} = {value:.12g}")
    diameter = setup.context.diameter
    lipschitz = 2 * cfg.geometric_diameter
    eta = tuned_eta(diameter, lipschitz, cfg.horizon, constants, cfg.n_agents)
    print(f"tuned_eta = {eta:.12g}")
    bound = full_regret_bound(diameter, lipschitz, cfg.horizon, constants)
    print(f"full_regret_bound = {bound:.12g}")
    bound = network_error_bound(cfg.n_agents, eta, lipschitz, constants.rho)
    print(f"network_error_bound = {bound:.12g}")


COMMANDS: typing.Dict[str, typing.Callable[[argparse.Namespace], None]] = {
    "run": _run,
    "validate": _validate,
    "sweep": _sweep,
    "constants": _constants,
}


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    """Parse the arguments and run a command.

    Args:
        argv: arguments without the program name; sys.argv when None.

    Returns:
        0 on success, 1 on configuration rejection, 2 on runtime failure.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or EXIT_OK)
    logging.basicConfig(
        level=args.log_level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    try:
        COMMANDS[args.command](args)
    except ConfigInvalidError as exc:
        logger.error("Configuration rejected: %s", exc.msg)
        return EXIT_CONFIG
    except GeodesicGossipError as exc:
        logger.error("Run failed: %s", exc.msg)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":  # pragma: nocover
    sys.exit(main())
