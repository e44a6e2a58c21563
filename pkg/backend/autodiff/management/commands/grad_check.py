"""
Finite-difference gradient checks for every layer and both network stacks.
"""

import time
from argparse import ArgumentParser
from dataclasses import dataclass
from typing import Any

import numpy as np

from autodiff.checks import LAYER_CHECKS
from autodiff.gradcheck import GradCheckReport
from autodiff.tensor import precision
from core.commands import MemnavCommand
from core.exceptions import CheckFailedError, ConfigurationError
from memory import network as mm
from memory.types import EncoderKind, MMArchitecture
from planner import network as vin


@dataclass(frozen=True)
class GradCheckConfig:
    dtype: str = "float32"
    tolerance: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dtype not in ("float32", "float64"):
            raise ConfigurationError(f"dtype must be float32 or float64, got {self.dtype}")


def run_gradient_checks(config: GradCheckConfig) -> list[GradCheckReport]:
    reports = []
    with precision(config.dtype):
        for index, check in enumerate(LAYER_CHECKS):
            reports.append(check(np.random.default_rng([config.seed, index]), config.tolerance))
        reports.append(mm.stack_gradient_check(np.random.default_rng([config.seed, 100]), config.tolerance))
        mlp = MMArchitecture(width=7, height=7, embedding_size=4, encoder=EncoderKind.MLP, mlp_hidden=6)
        reports.append(mm.stack_gradient_check(np.random.default_rng([config.seed, 101]), config.tolerance, mlp))
        reports.append(vin.stack_gradient_check(np.random.default_rng([config.seed, 102]), config.tolerance))
    return reports


class Command(MemnavCommand):
    help = "Check analytic gradients against central differences"
    run_name = "grad-check"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--dtype", choices=["float32", "float64"], help="Working precision")
        parser.add_argument("--tolerance", type=float, help="Maximum relative error")
        parser.add_argument("--seed", type=int)

    def execute_command(self, **options: Any) -> None:
        overrides = {key: options.get(key) for key in ("dtype", "tolerance", "seed")}
        config = self.resolve(GradCheckConfig, options, overrides)

        started = time.monotonic()
        with self.tracked(config, None, config.seed) as run:
            reports = run_gradient_checks(config)
            failed = [r for r in reports if not r.passed]
            run.summary = {
                "checks": len(reports),
                "failed": [r.name for r in failed],
                "max_rel_error": max(r.max_rel_error for r in reports),
            }
            for report in reports:
                style = self.style.SUCCESS if report.passed else self.style.ERROR
                self.stdout.write(style(f"  {report.summary()}"))
            if failed:
                raise CheckFailedError(
                    f"{len(failed)} of {len(reports)} gradient checks failed",
                    failed=[r.name for r in failed],
                )

        self.stdout.write(
            self.style.SUCCESS(
                f"✓ All {len(reports)} gradient checks passed at {config.dtype} "
                f"({time.monotonic() - started:.1f}s)"
            )
        )
