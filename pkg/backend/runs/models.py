import uuid

from django.db import models


class Run(models.Model):
    """One invocation of a memnav command and where its outputs went."""

    STATUS_CHOICES = [
        ("running", "Running"),
        ("succeeded", "Succeeded"),
        ("failed", "Failed"),
    ]

    id = models.UUIDField(primary_key=True, default=uuid.uuid4, editable=False)
    command = models.CharField(max_length=50, db_index=True)
    status = models.CharField(max_length=10, choices=STATUS_CHOICES, default="running", db_index=True)
    seed = models.BigIntegerField(null=True, blank=True)
    output_dir = models.CharField(max_length=500, blank=True, default="")
    config = models.JSONField(default=dict)
    summary = models.JSONField(default=dict)
    error_code = models.CharField(max_length=50, null=True, blank=True)
    error_message = models.TextField(null=True, blank=True)
    duration_ms = models.IntegerField(null=True, blank=True)
    started_at = models.DateTimeField(auto_now_add=True, db_index=True)
    finished_at = models.DateTimeField(null=True, blank=True)

    class Meta:
        db_table = "runs"
        ordering = ["-started_at"]
        indexes = [
            models.Index(fields=["command", "-started_at"], name="runs_command_started_idx"),
        ]

    def __str__(self) -> str:
        return f"{self.command} - {self.status} - {self.started_at}"


class EvaluationPoint(models.Model):
    """Aggregate metrics of one experiment point for one method."""

    METHOD_CHOICES = [
        ("mm-vin", "Learned memory + VIN"),
        ("oracle", "Oracle"),
    ]

    run = models.ForeignKey(Run, on_delete=models.CASCADE, related_name="points")
    method = models.CharField(max_length=10, choices=METHOD_CHOICES)
    label = models.CharField(max_length=200)
    point = models.JSONField(default=dict)
    trials = models.IntegerField()
    mean_asa = models.FloatField()
    mean_spl = models.FloatField()
    std_spl = models.FloatField()
    seeds = models.JSONField(default=list)

    class Meta:
        db_table = "evaluation_points"
        ordering = ["run", "id"]

    def __str__(self) -> str:
        return f"{self.method} {self.label}: SPL {self.mean_spl:.3f}"
