"""
Show recent memnav runs from the run ledger.
"""

from typing import Any

from django.core.management.base import BaseCommand
from django.db.models import Count

from runs.models import Run


class Command(BaseCommand):
    help = "Show recent memnav runs with their status and summary"

    def add_arguments(self, parser) -> None:
        parser.add_argument(
            "--command",
            type=str,
            help="Only show runs of this command (e.g. eval, train-mm)",
        )
        parser.add_argument(
            "--status",
            type=str,
            choices=[status for status, _ in Run.STATUS_CHOICES],
            help="Filter by run status",
        )
        parser.add_argument(
            "--limit",
            type=int,
            default=20,
            help="Maximum number of runs to show",
        )
        parser.add_argument(
            "--verbose",
            action="store_true",
            help="Show resolved config and evaluation points",
        )

    def handle(self, *args: Any, **options: Any) -> None:
        command: str | None = options.get("command")
        status_filter: str | None = options.get("status")
        verbose: bool = options.get("verbose", False)

        queryset = Run.objects.all()
        if command:
            queryset = queryset.filter(command=command)
        if status_filter:
            queryset = queryset.filter(status=status_filter)

        runs = list(queryset.order_by("-started_at")[: max(0, options["limit"])])
        if not runs:
            self.stdout.write(self.style.WARNING("No runs found"))
            return

        self.stdout.write("")
        self.stdout.write(self.style.SUCCESS(f"Recent runs ({len(runs)})"))
        self.stdout.write("=" * 80)
        for run in runs:
            self._display_run(run, verbose)

        self.stdout.write("=" * 80)
        counts = queryset.values("status").annotate(n=Count("id")).order_by("status")
        self.stdout.write("Status breakdown:")
        for row in counts:
            self.stdout.write(f"  {row['status']}: {row['n']}")

    def _display_run(self, run: Run, verbose: bool) -> None:
        self.stdout.write("")
        self.stdout.write(f"{run.command}  {run.id}")
        self.stdout.write(f"  Started: {run.started_at:%Y-%m-%d %H:%M:%S}")
        if run.duration_ms is not None:
            self.stdout.write(f"  Duration: {run.duration_ms / 1000:.1f}s")
        if run.seed is not None:
            self.stdout.write(f"  Seed: {run.seed}")
        if run.output_dir:
            self.stdout.write(f"  Output: {run.output_dir}")

        status_display = f"  Status: {run.get_status_display()}"
        if run.status == "succeeded":
            self.stdout.write(self.style.SUCCESS(status_display))
        elif run.status == "failed":
            self.stdout.write(self.style.ERROR(f"{status_display} ({run.error_code}: {run.error_message})"))
        else:
            self.stdout.write(self.style.WARNING(status_display))

        for key, value in sorted(run.summary.items()):
            self.stdout.write(f"  {key}: {value}")

        if verbose:
            for key, value in sorted(run.config.items()):
                self.stdout.write(f"    {key}={value}")
            for point in run.points.all():
                self.stdout.write(
                    f"    [{point.method}] {point.label}: ASA {point.mean_asa:.3f} "
                    f"SPL {point.mean_spl:.3f} ± {point.std_spl:.3f} ({point.trials} trials)"
                )
