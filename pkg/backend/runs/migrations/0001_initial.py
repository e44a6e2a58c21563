import uuid

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Run",
            fields=[
                (
                    "id",
                    models.UUIDField(
                        default=uuid.uuid4, editable=False, primary_key=True, serialize=False
                    ),
                ),
                ("command", models.CharField(db_index=True, max_length=50)),
                (
                    "status",
                    models.CharField(
                        choices=[
                            ("running", "Running"),
                            ("succeeded", "Succeeded"),
                            ("failed", "Failed"),
                        ],
                        db_index=True,
                        default="running",
                        max_length=10,
                    ),
                ),
                ("seed", models.BigIntegerField(blank=True, null=True)),
                ("output_dir", models.CharField(blank=True, default="", max_length=500)),
                ("config", models.JSONField(default=dict)),
                ("summary", models.JSONField(default=dict)),
                ("error_code", models.CharField(blank=True, max_length=50, null=True)),
                ("error_message", models.TextField(blank=True, null=True)),
                ("duration_ms", models.IntegerField(blank=True, null=True)),
                ("started_at", models.DateTimeField(auto_now_add=True, db_index=True)),
                ("finished_at", models.DateTimeField(blank=True, null=True)),
            ],
            options={
                "db_table": "runs",
                "ordering": ["-started_at"],
                "indexes": [
                    models.Index(fields=["command", "-started_at"], name="runs_command_started_idx")
                ],
            },
        ),
        migrations.CreateModel(
            name="EvaluationPoint",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                (
                    "method",
                    models.CharField(
                        choices=[("mm-vin", "Learned memory + VIN"), ("oracle", "Oracle")],
                        max_length=10,
                    ),
                ),
                ("label", models.CharField(max_length=200)),
                ("point", models.JSONField(default=dict)),
                ("trials", models.IntegerField()),
                ("mean_asa", models.FloatField()),
                ("mean_spl", models.FloatField()),
                ("std_spl", models.FloatField()),
                ("seeds", models.JSONField(default=list)),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="points",
                        to="runs.run",
                    ),
                ),
            ],
            options={
                "db_table": "evaluation_points",
                "ordering": ["run", "id"],
            },
        ),
    ]
