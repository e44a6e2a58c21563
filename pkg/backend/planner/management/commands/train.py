"""
Train the memory network (``mm``) or the VIN planner (``vin``).

Every epoch writes the model checkpoint and the optimizer/RNG state into the
output directory, so ``--resume DIR`` continues a run exactly where it stopped.
"""

import csv
import json
from argparse import ArgumentParser
from dataclasses import replace
from pathlib import Path
from typing import Any

import numpy as np
from django.conf import settings

from autodiff.checkpoint import load_training_state, save_training_state
from autodiff.optim import Optimizer
from core.commands import MemnavCommand
from core.exceptions import ConfigurationError
from expert.labels import generate_labeled_samples
from gridworld.container import Dataset
from memory.network import MemoryNetwork
from memory.training import MMTrainingConfig, MMTrainingReport, build_triple_sets, train_mm
from planner.network import ValueIterationNetwork
from planner.training import (
    SampleBatch,
    VINTrainingConfig,
    VINTrainingReport,
    fine_tune_end_to_end,
    train_vin,
)

MM_OPTIONS = {
    "embedding_size": "H",
    "encoder": "encoder",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "learning_rate": "lr",
    "optimizer": "optimizer",
    "train_triples": "samples",
    "test_triples": "test_samples",
    "pool_maps": "pool_maps",
    "seed": "seed",
    "dataset": "dataset",
    "sweep_h": "sweep_h",
    "out": "out",
}
VIN_OPTIONS = {
    "family": "family",
    "k_iterations": "k",
    "handcrafted_reward": "handcrafted_reward",
    "epochs": "epochs",
    "batch_size": "batch_size",
    "learning_rate": "lr",
    "optimizer": "optimizer",
    "train_samples": "samples",
    "test_samples": "test_samples",
    "labels_per_map": "labels_per_map",
    "end_to_end": "end_to_end",
    "mm_checkpoint": "mm_checkpoint",
    "seed": "seed",
    "dataset": "dataset",
    "out": "out",
}


def _restore_rng(state: dict[str, Any]) -> np.random.Generator:
    rng = np.random.default_rng()
    rng.bit_generator.state = state
    return rng


def _write_curves(path: Path, header: list[str], rows: list[list[Any]]) -> None:
    with path.open("w", encoding="utf-8", newline="") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_report(path: Path, report: dict[str, Any]) -> None:
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class Command(MemnavCommand):
    help = "Train the memory network (mm) or the VIN planner (vin)"
    run_name = "train"

    def add_command_arguments(self, parser: ArgumentParser) -> None:
        parser.add_argument("module", choices=["mm", "vin"])
        parser.add_argument("--dataset", type=Path, help="Dataset directory written by gen-data")
        parser.add_argument("--size", type=int, help="Square map side")
        parser.add_argument("--width", type=int)
        parser.add_argument("--height", type=int)
        parser.add_argument("--H", dest="H", type=int, help="Embedding size")
        parser.add_argument("--encoder", choices=["conv", "mlp"])
        parser.add_argument("--family", choices=["simple", "complex"])
        parser.add_argument("--k", type=int, help="VIN iterations (default X + Y)")
        parser.add_argument("--handcrafted-reward", action="store_true", default=None)
        parser.add_argument("--seed", type=int)
        parser.add_argument("--epochs", type=int)
        parser.add_argument("--batch-size", type=int)
        parser.add_argument("--lr", type=float)
        parser.add_argument("--optimizer", choices=["adam", "sgd"])
        parser.add_argument("--samples", type=int, help="Training triples (mm) or labeled samples (vin)")
        parser.add_argument("--test-samples", type=int)
        parser.add_argument("--pool-maps", type=int)
        parser.add_argument("--labels-per-map", type=int)
        parser.add_argument("--resume", type=Path, help="Output directory of an interrupted run")
        parser.add_argument("--sweep-h", type=lambda v: [int(x) for x in v.split(",")], help="e.g. 16,32,64")
        parser.add_argument("--end-to-end", action="store_true", default=None)
        parser.add_argument("--mm-checkpoint", type=Path)
        parser.add_argument("--out", type=Path, help="Output directory")

    def execute_command(self, **options: Any) -> None:
        module = options["module"]
        size = options.get("size")
        mapping = MM_OPTIONS if module == "mm" else VIN_OPTIONS
        overrides = {field: options.get(flag) for field, flag in mapping.items()}
        overrides["width"] = options.get("width") or size
        overrides["height"] = options.get("height") or size
        self.run_name = f"train-{module}"
        fallbacks = {"out": Path(settings.MEMNAV_DATA_ROOT) / "models" / module}

        if module == "mm":
            mm_config = self.resolve(MMTrainingConfig, options, overrides, fallbacks)
            with self.tracked(mm_config, mm_config.out, mm_config.seed) as run:
                run.summary = self.train_mm(mm_config, options.get("resume"))
        else:
            vin_config = self.resolve(VINTrainingConfig, options, overrides, fallbacks)
            with self.tracked(vin_config, vin_config.out, vin_config.seed) as run:
                run.summary = self.train_vin(vin_config, options.get("resume"))

    # memory network

    def _source_maps(self, config: MMTrainingConfig | VINTrainingConfig) -> Dataset | None:
        if config.dataset is None:
            return None
        dataset = Dataset.load(config.dataset)
        shape = (dataset.manifest.get("width"), dataset.manifest.get("height"))
        if shape != (config.width, config.height):
            raise ConfigurationError(
                f"Dataset maps are {shape[0]}x{shape[1]}, expected {config.width}x{config.height}",
                dataset=str(config.dataset),
            )
        return dataset

    def train_mm(self, config: MMTrainingConfig, resume: Path | None) -> dict[str, Any]:
        dataset = self._source_maps(config)
        maps = [record.grid for record in dataset.episodes] if dataset else None
        train, test = build_triple_sets(config, maps)
        self.stdout.write(f"Triples: {len(train)} train, {len(test)} test")

        if config.sweep_h:
            return self._sweep_h(config, train, test)

        network, report = self._fit_mm(config, train, test, config.out, resume)
        summary = {
            "accuracy": report.final_accuracy,
            "invariants": report.invariants,
            "steps": report.steps,
            "message_bits": network.message_bits,
            "compression_ratio": config.width * config.height / config.embedding_size,
        }
        _write_report(config.out / "report.json", summary)
        self.stdout.write(
            self.style.SUCCESS(f"✓ Reconstruction accuracy {report.final_accuracy:.2f}% (H={config.embedding_size})")
        )
        return summary

    def _fit_mm(
        self,
        config: MMTrainingConfig,
        train: Any,
        test: Any,
        out: Path,
        resume: Path | None,
    ) -> tuple[MemoryNetwork, MMTrainingReport]:
        network = optimizer_state = rng = None
        start_epoch = 0
        if resume is not None:
            network = MemoryNetwork.load(resume)
            optimizer_state, start_epoch, rng_state = load_training_state(resume)
            rng = _restore_rng(rng_state)
            self.stdout.write(f"Resuming from epoch {start_epoch} of {resume}")

        def on_epoch(epoch: int, net: MemoryNetwork, optimizer: Optimizer, shuffle: np.random.Generator) -> None:
            net.save(out, {"epoch": epoch, "seed": config.seed})
            save_training_state(out, optimizer.state(), epoch, shuffle)

        network, report = train_mm(config, train, test, network, optimizer_state, start_epoch, rng, on_epoch)
        if not report.epochs:
            network.save(out, {"epoch": start_epoch, "seed": config.seed})
        _write_curves(
            out / "curves.csv",
            ["epoch", "loss", "accuracy"],
            [[e.epoch, f"{e.loss:.6f}", f"{e.accuracy:.4f}"] for e in report.epochs],
        )
        return network, report

    def _sweep_h(self, config: MMTrainingConfig, train: Any, test: Any) -> dict[str, Any]:
        rows = []
        accuracies = {}
        for h in config.sweep_h:
            point = replace(config, embedding_size=h, sweep_h=())
            _, report = self._fit_mm(point, train, test, config.out / f"H{h}", None)
            accuracies[h] = report.final_accuracy
            rows.append([h, f"{report.final_accuracy:.4f}", h * 32])
            self.stdout.write(f"  H={h}: {report.final_accuracy:.2f}%")
        _write_curves(config.out / "sweep_h.csv", ["H", "accuracy", "message_bits"], rows)

        ordered = [accuracies[h] for h in sorted(accuracies)]
        monotone = all(a <= b for a, b in zip(ordered, ordered[1:], strict=False))
        if monotone:
            self.stdout.write(self.style.SUCCESS("✓ Accuracy is non-decreasing in H"))
        else:
            self.stdout.write(self.style.WARNING("Accuracy is not monotone in H at this budget"))
        summary = {"sweep_h": {str(h): a for h, a in accuracies.items()}, "monotone": monotone}
        _write_report(config.out / "report.json", summary)
        return summary

    # planner

    def _samples(self, config: VINTrainingConfig) -> tuple[SampleBatch, SampleBatch]:
        dataset = self._source_maps(config)
        if dataset is not None:
            train = dataset.label_split(test=False)[: config.train_samples]
            test = dataset.label_split(test=True)[: config.test_samples]
            if not train or not test:
                raise ConfigurationError("Dataset holds no labels for one of the splits", dataset=str(config.dataset))
        else:
            kwargs = {"per_map": config.labels_per_map}
            train = generate_labeled_samples(
                config.family, config.width, config.height, config.train_samples,
                np.random.default_rng([config.seed, 10]), **kwargs,
            )
            test = generate_labeled_samples(
                config.family, config.width, config.height, config.test_samples,
                np.random.default_rng([config.seed, 11]), **kwargs,
            )
        self.stdout.write(f"Samples: {len(train)} train, {len(test)} test")
        return SampleBatch.from_samples(train), SampleBatch.from_samples(test)

    def train_vin(self, config: VINTrainingConfig, resume: Path | None) -> dict[str, Any]:
        train, test = self._samples(config)
        out = config.out

        network = optimizer_state = rng = None
        start_epoch = 0
        if resume is not None:
            network = ValueIterationNetwork.load(resume)
            optimizer_state, start_epoch, rng_state = load_training_state(resume)
            rng = _restore_rng(rng_state)
            self.stdout.write(f"Resuming from epoch {start_epoch} of {resume}")
        network = network or ValueIterationNetwork.initialize(
            config.architecture(), np.random.default_rng([config.seed, 2])
        )

        def on_epoch(epoch: int, optimizer: Optimizer, shuffle: np.random.Generator) -> None:
            network.save(out, {"epoch": epoch, "seed": config.seed, "family": config.family})
            save_training_state(out, optimizer.state(), epoch, shuffle)

        network, report = train_vin(config, train, test, network, optimizer_state, start_epoch, rng, on_epoch)
        if not report.epochs:
            network.save(out, {"epoch": start_epoch, "seed": config.seed, "family": config.family})
        self._write_vin_curves(out / "curves.csv", report)
        summary: dict[str, Any] = {
            "asa": report.final_asa,
            "majority_asa": report.majority_asa,
            "steps": report.steps,
            "k_iterations": network.arch.k_iterations,
        }
        self.stdout.write(
            self.style.SUCCESS(f"✓ Held-out ASA {report.final_asa:.2f}% (majority class {report.majority_asa:.2f}%)")
        )

        if config.end_to_end and config.mm_checkpoint is not None:
            memory = MemoryNetwork.load(config.mm_checkpoint)
            joint = fine_tune_end_to_end(config, memory, network, train, test)
            memory.save(out / "mm", {"seed": config.seed, "fine_tuned": True})
            network.save(out, {"epoch": config.epochs, "seed": config.seed, "family": config.family})
            self._write_vin_curves(out / "curves_end_to_end.csv", joint)
            summary["end_to_end_asa"] = joint.final_asa
            self.stdout.write(self.style.SUCCESS(f"✓ End-to-end ASA {joint.final_asa:.2f}%"))

        _write_report(out / "report.json", summary)
        return summary

    @staticmethod
    def _write_vin_curves(path: Path, report: VINTrainingReport) -> None:
        _write_curves(
            path,
            ["epoch", "loss", "asa"],
            [[e.epoch, f"{e.loss:.6f}", f"{e.asa:.4f}"] for e in report.epochs],
        )
