"""
Verify the BFS expert and the VIN planner against independent oracles.
"""

import time
from argparse import ArgumentParser
from dataclasses import dataclass
from typing import Any

from core.commands import MemnavCommand
from core.exceptions import CheckFailedError
from expert.checks import (
    CheckResult,
    check_bfs_against_enumeration,
    check_bfs_against_floyd_warshall,
    check_optimal_action_definition,
    check_value_iteration_policy,
)
from planner.checks import check_vin_matches_value_iteration


@dataclass(frozen=True)
class OracleCheckConfig:
    bfs_grids: int = 25
    vin_grids: int = 50
    seed: int = 0


class Command(MemnavCommand):
    help = "Check BFS against exhaustive shortest paths and the hand-set VIN against value iteration"
    run_name = "oracle-check"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("--bfs-grids", type=int, help="Random 5x5 grids for the BFS oracle")
        parser.add_argument("--vin-grids", type=int, help="Random 8x8 Complex grids for the VIN oracle")
        parser.add_argument("--seed", type=int)

    def execute_command(self, **options: Any) -> None:
        overrides = {key: options.get(key) for key in ("bfs_grids", "vin_grids", "seed")}
        config = self.resolve(OracleCheckConfig, options, overrides)

        started = time.monotonic()
        with self.tracked(config, None, config.seed) as run:
            results: list[CheckResult] = [
                check_bfs_against_enumeration(config.bfs_grids, config.seed),
                check_bfs_against_floyd_warshall(config.bfs_grids, config.seed),
                check_optimal_action_definition(config.bfs_grids, config.seed),
                check_value_iteration_policy(config.vin_grids, config.seed),
                check_vin_matches_value_iteration(config.vin_grids, config.seed),
            ]
            run.summary = {r.name: {"cases": r.cases, "mismatches": r.mismatches} for r in results}
            for result in results:
                line = f"  {result.name}: {result.cases} cases, {result.mismatches} mismatches"
                self.stdout.write(self.style.SUCCESS(line) if result.passed else self.style.ERROR(line))
                for note in result.notes:
                    self.stdout.write(f"    {note}")
            failed = [r.name for r in results if not r.passed]
            if failed:
                raise CheckFailedError(f"Oracle checks failed: {', '.join(failed)}", failed=failed)

        self.stdout.write(
            self.style.SUCCESS(f"✓ All oracle checks passed ({time.monotonic() - started:.1f}s)")
        )
