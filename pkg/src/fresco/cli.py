"""Entry point of the ``fresco`` command line."""

import argparse
import logging
import sys

from . import __version__
from .commands import load_commands
from .commands._common import common_parser
from .exceptions import FrescoError
from .threads import apply_thread_limits

logger = logging.getLogger(__name__)

_LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


class FrescoArgumentParser(argparse.ArgumentParser):
    """Argument parser exiting with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> FrescoArgumentParser:
    """Builds the parser with one subparser per command module."""
    parser = FrescoArgumentParser(
        prog="fresco", description="Fusion of unregistered hyperspectral and multispectral images."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", metavar="COMMAND", required=True)
    parent = common_parser()

    for module in load_commands():
        plugin = module.register_plugin()
        summary = (module.__doc__ or "").strip().splitlines()[0]
        subparser = subparsers.add_parser(plugin.name(), parents=[parent], help=summary, description=module.__doc__)
        module.setup_parser(subparser)
        subparser.set_defaults(func=module.command)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Parses ``argv`` and runs the selected subcommand.

    Args:
        argv (list[str], optional): Arguments without the program name.
            Defaults to ``sys.argv[1:]``.

    Returns:
        int: 0 on success, 1 on usage or input errors, 2 on numeric aborts.
    """
    parser = build_parser()
    try:
        opts = parser.parse_args(argv)
    except SystemExit as error:
        return error.code if isinstance(error.code, int) else 1

    logging.basicConfig(
        level=_LOG_LEVELS[min(opts.verbose, len(_LOG_LEVELS) - 1)],
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    apply_thread_limits()

    try:
        opts.func(opts, parser)
    except FrescoError as error:
        print(f"Error: {error}", file=sys.stderr)
        return error.exit_code
    except OSError as error:
        print(f"Error: {error}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
