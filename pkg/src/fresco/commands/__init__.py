"""Subcommands of the ``fresco`` command line.

Every module exposes ``setup_parser(parser, completions=False)``,
``command(opts, parser=None, extra_arg_groups=None)`` and ``register_plugin()``
returning its :class:`Command` subclass.
"""

import importlib

COMMAND_MODULES = (
    "gen_data",
    "estimate_pm",
    "unmix",
    "tune",
    "train_hsr",
    "infer",
    "evaluate",
    "pipeline",
    "preview",
)


class Command:
    """Base class of the subcommands."""

    @classmethod
    def name(cls) -> str:
        """Returns the subcommand name used on the command line."""
        raise NotImplementedError


def load_commands() -> list:
    """Imports every subcommand module, in declaration order."""
    return [importlib.import_module(f"{__name__}.{module}") for module in COMMAND_MODULES]
