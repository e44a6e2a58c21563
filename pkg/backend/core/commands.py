"""Shared behaviour of memnav management commands."""

import logging
from argparse import ArgumentParser
from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from pathlib import Path
from typing import Any, TypeVar

from django.core.management.base import BaseCommand, CommandError

from runs.services import RunHandle, track_run

from .config import config_to_dict, log_resolved, read_config_file, resolve_config, write_config_file
from .exceptions import MemnavError

logger = logging.getLogger(__name__)

C = TypeVar("C")


class MemnavCommand(BaseCommand):
    """
    Base for commands driven by a run configuration.

    Subclasses implement ``execute_command``; any ``MemnavError`` escaping it
    becomes a ``CommandError`` whose return code encodes the failure class.
    """

    run_name = ""

    def add_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument(
            "--config",
            type=Path,
            help="KEY=value run configuration; explicit flags take precedence",
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        pass

    def resolve(
        self,
        config_cls: type[C],
        options: Mapping[str, Any],
        overrides: Mapping[str, Any],
        fallbacks: Mapping[str, Any] | None = None,
    ) -> C:
        """``fallbacks`` (process settings) rank below the config file and above dataclass defaults."""
        file_values = {key.upper(): str(value) for key, value in (fallbacks or {}).items()}
        if options.get("config"):
            file_values.update(read_config_file(options["config"]))
        config = resolve_config(config_cls, file_values, overrides)
        log_resolved(config, self.run_name)
        return config

    @contextmanager
    def tracked(self, config: Any, out: Path | None, seed: int | None = None) -> Iterator[RunHandle]:
        """Writes ``config.env`` into ``out`` and records the run in the ledger."""
        if out is not None:
            write_config_file(config, out)
        with track_run(self.run_name, config_to_dict(config), seed, out) as handle:
            yield handle

    def handle(self, *args: Any, **options: Any) -> None:
        try:
            self.execute_command(**options)
        except MemnavError as e:
            logger.error(f"{self.run_name} failed: {e!r}")
            raise CommandError(str(e), returncode=int(e.exit_code)) from e

    def execute_command(self, **options: Any) -> None:
        raise NotImplementedError
