import logging
import time
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from django.utils import timezone

from core.exceptions import MemnavError
from core.types import ErrorCode

from .models import EvaluationPoint, Run

logger = logging.getLogger(__name__)


@dataclass
class RunHandle:
    """What a command reports back to the ledger while it runs."""

    run: Run | None
    summary: dict[str, Any] = field(default_factory=dict)

    def add_point(
        self,
        method: str,
        label: str,
        point: dict[str, Any],
        trials: int,
        mean_asa: float,
        mean_spl: float,
        std_spl: float,
        seeds: list[Any],
    ) -> None:
        if self.run is None:
            return
        try:
            EvaluationPoint.objects.create(
                run=self.run,
                method=method,
                label=label,
                point=point,
                trials=trials,
                mean_asa=mean_asa,
                mean_spl=mean_spl,
                std_spl=std_spl,
                seeds=seeds,
            )
        except Exception as e:
            logger.error(f"Failed to record evaluation point {label} for run {self.run.id}: {e}")


def _start(command: str, config: dict[str, Any], seed: int | None, output_dir: Path | None) -> Run | None:
    try:
        return Run.objects.create(
            command=command,
            seed=seed,
            output_dir=str(output_dir or ""),
            config=config,
        )
    except Exception as e:
        logger.error(f"Failed to open run ledger entry for {command}: {e}")
        return None


def _finish(run: Run, started: float, status: str, summary: dict[str, Any], error: Exception | None) -> None:
    run.status = status
    run.summary = summary
    run.duration_ms = int((time.time() - started) * 1000)
    run.finished_at = timezone.now()
    if isinstance(error, MemnavError):
        run.error_code = error.error_code.value
    elif error is not None:
        run.error_code = ErrorCode.UNKNOWN.value
    run.error_message = str(error) if error is not None else None
    try:
        run.save()
    except Exception as e:
        logger.error(f"Failed to close run ledger entry {run.id}: {e}")


@contextmanager
def track_run(
    command: str,
    config: dict[str, Any],
    seed: int | None = None,
    output_dir: Path | None = None,
) -> Iterator[RunHandle]:
    """
    Records a ``Run`` row around a command body. Ledger errors are logged and
    never interrupt the command; command errors are recorded and re-raised.
    """
    started = time.time()
    handle = RunHandle(_start(command, config, seed, output_dir))
    try:
        yield handle
    except Exception as e:
        if handle.run is not None:
            _finish(handle.run, started, "failed", handle.summary, e)
        raise
    if handle.run is not None:
        _finish(handle.run, started, "succeeded", handle.summary, None)
