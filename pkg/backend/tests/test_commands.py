import csv
import json
from io import StringIO
from pathlib import Path

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from core.exceptions import ConfigurationError
from core.types import ExitCode
from gridworld.container import Dataset
from runs.models import EvaluationPoint, Run
from simulation.management.commands.eval import EvalConfig
from simulation.types import Method

pytestmark = pytest.mark.django_db


def run(name: str, *args, **options) -> str:
    out = StringIO()
    call_command(name, *args, stdout=out, **options)
    return out.getvalue()


def gen_data(out: Path, **options) -> str:
    values = {"family": "simple", "size": 8, "count": 6, "seed": 7, "labels_per_map": 3, "out": out}
    values.update(options)
    return run("gen_data", **values)


def test_gen_data_is_reproducible(tmp_path) -> None:
    output = gen_data(tmp_path / "a")
    gen_data(tmp_path / "b")
    assert "Wrote 6 simple maps (18 labels)" in output
    for name in ("episodes.bin", "labels.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    dataset = Dataset.load(tmp_path / "a")
    assert len(dataset.episodes) == 6
    assert len(dataset.label_split(test=True)) == 3
    assert (tmp_path / "a" / "config.env").read_text().startswith("COUNT=6\n")

    run_row = Run.objects.get(command="gen-data", output_dir=str(tmp_path / "a"))
    assert run_row.status == "succeeded"
    assert run_row.summary["label_count"] == 18


def test_gen_data_with_no_maps(tmp_path) -> None:
    gen_data(tmp_path / "empty", count=0)
    manifest = json.loads((tmp_path / "empty" / "manifest.json").read_text())
    assert manifest["count"] == 0
    assert manifest["fill"]["mean"] is None


def test_config_file_and_flags(tmp_path) -> None:
    config = tmp_path / "gen.env"
    config.write_text("FAMILY=simple\nWIDTH=8\nHEIGHT=8\nCOUNT=3\nSEED=1\nLABELS_PER_MAP=0\n")
    run("gen_data", config=config, count=2, out=tmp_path / "data")
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert (manifest["count"], manifest["seed"], manifest["label_count"]) == (2, 1, 0)


def test_invalid_configuration_exit_code(tmp_path) -> None:
    with pytest.raises(CommandError) as excinfo:
        gen_data(tmp_path / "bad", robots=0)
    assert excinfo.value.returncode == ExitCode.CONFIG
    assert "invalid_config" in str(excinfo.value)

    with pytest.raises(CommandError) as excinfo:
        run("render", out=tmp_path / "render")
    assert excinfo.value.returncode == ExitCode.CONFIG


def test_learned_eval_needs_checkpoints_and_records_failure(tmp_path) -> None:
    with pytest.raises(CommandError) as excinfo:
        run("eval", family="simple", size=8, trials=1, out=tmp_path / "eval")
    assert excinfo.value.returncode == ExitCode.CONFIG
    failed = Run.objects.get(command="eval")
    assert failed.status == "failed"
    assert failed.error_code == "invalid_config"


def test_eval_adds_the_oracle_only_when_asked() -> None:
    assert EvalConfig().spec().methods == (Method.LEARNED,)
    assert len(EvalConfig(sweep="robots=1..6").spec().points()) == 6
    assert EvalConfig(baseline="oracle").spec().methods == (Method.LEARNED, Method.ORACLE)
    assert EvalConfig(learned=False, baseline="oracle").spec().methods == (Method.ORACLE,)
    with pytest.raises(ConfigurationError):
        EvalConfig(learned=False)


def test_oracle_eval_and_transcript_render(tmp_path) -> None:
    out = tmp_path / "eval"
    output = run(
        "eval",
        oracle_only=True,
        family="simple",
        size=8,
        robots=2,
        trials=2,
        sweep=["robots=1..2"],
        transcripts=True,
        record_beliefs=True,
        out=out,
    )
    assert "oracle" in output
    rows = list(csv.DictReader((out / "results.csv").read_text().splitlines()))
    assert [row["point"].split(",")[0] for row in rows] == ["robots=1", "robots=2"]
    assert EvaluationPoint.objects.filter(run__command="eval").count() == 2

    transcript = out / "transcripts" / "point01-oracle.jsonl"
    assert transcript.is_file()
    run("render", transcript=transcript, out=tmp_path / "render")
    audit = json.loads((tmp_path / "render" / "transcript_audit.json").read_text())
    assert audit["causality_violations"] == []
    assert float(rows[1]["mean_spl"]) == pytest.approx(audit["spl"], abs=1e-6)
    assert (tmp_path / "render" / "episode0000-oracle-map.pgm").is_file()
    assert (tmp_path / "render" / "episode0000-oracle-robot0-errors.ppm").is_file()


def test_render_dataset(tmp_path) -> None:
    gen_data(tmp_path / "data", labels_per_map=0)
    output = run("render", dataset=tmp_path / "data", limit=2, scale=3, out=tmp_path / "images")
    assert "Wrote 2 images" in output
    assert sorted(p.name for p in (tmp_path / "images").glob("*.pgm")) == ["map0000.pgm", "map0001.pgm"]


def test_grad_check_passes_in_double_precision() -> None:
    output = run("grad_check", dtype="float64", seed=1)
    assert "gradient checks passed" in output
    assert Run.objects.get(command="grad-check").summary["failed"] == []


@pytest.mark.slow
def test_oracle_check_on_a_few_grids() -> None:
    output = run("oracle_check", bfs_grids=2, vin_grids=1, seed=2)
    assert "All oracle checks passed" in output


@pytest.mark.slow
def test_train_then_evaluate_learned_stack(tmp_path) -> None:
    mm_config = tmp_path / "mm.env"
    mm_config.write_text("POOL_MAPS=4\nINVARIANT_PAIRS=4\n")
    mm_out = tmp_path / "models" / "mm"
    run(
        "train", "mm",
        config=mm_config, size=8, H=8, samples=8, test_samples=4, epochs=1, batch_size=4, out=mm_out,
    )
    report = json.loads((mm_out / "report.json").read_text())
    assert report["message_bits"] == 8 * 32
    assert report["compression_ratio"] == 8.0
    assert (mm_out / "training_state.json").is_file()

    resumed = tmp_path / "models" / "mm-resumed"
    run(
        "train", "mm",
        config=mm_config, size=8, H=8, samples=8, test_samples=4, epochs=2, batch_size=4,
        resume=mm_out, out=resumed,
    )
    curves = (resumed / "curves.csv").read_text().splitlines()
    assert [line.split(",")[0] for line in curves] == ["epoch", "2"]

    gen_data(tmp_path / "data")
    vin_out = tmp_path / "models" / "vin"
    run(
        "train", "vin",
        dataset=tmp_path / "data", size=8, k=4, samples=8, test_samples=3, epochs=1, batch_size=4, out=vin_out,
    )
    assert json.loads((vin_out / "report.json").read_text())["k_iterations"] == 4

    out = tmp_path / "eval"
    run("eval", mm=mm_out, vin=vin_out, baseline="none", family="simple", size=8, robots=2, trials=1, out=out)
    payload = json.loads((out / "results.json").read_text())
    assert payload["message_bits"] == {"oracle": 64, "mm-vin": 256}
    assert [p["method"] for p in payload["points"]] == ["mm-vin"]


def test_train_rejects_mismatched_dataset(tmp_path) -> None:
    gen_data(tmp_path / "data", labels_per_map=1)
    with pytest.raises(CommandError) as excinfo:
        run("train", "vin", dataset=tmp_path / "data", size=10, samples=2, test_samples=1, out=tmp_path / "vin")
    assert excinfo.value.returncode == ExitCode.CONFIG


def test_show_runs_lists_the_ledger(tmp_path) -> None:
    gen_data(tmp_path / "data", count=1, labels_per_map=0)
    output = run("show_runs", command="gen-data", verbose=True)
    assert "gen-data" in output
    assert "Status: Succeeded" in output
    assert "count=1" in output
