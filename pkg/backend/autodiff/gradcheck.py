"""
Finite-difference gradient checking.

Analytic gradients from one ``backward()`` at the working precision are
compared with central differences ``(f(θ+ε) − f(θ−ε)) / 2ε`` evaluated in
float64, per sampled coordinate, using the relative error
``|a − n| / max(|a|, |n|, floor)``.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .params import ParamSet
from .tensor import Tensor, no_grad, precision

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = {"float64": 1e-6, "float32": 1e-3}
DEFAULT_EPSILON = {"float64": 1e-6, "float32": 1e-3}
ERROR_FLOOR = 1e-3


@dataclass
class GradCheckReport:
    name: str
    tolerance: float
    max_rel_error: float = 0.0
    worst_param: str | None = None
    worst_index: tuple[int, ...] | None = None
    checked: int = 0
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.checked > 0 and self.max_rel_error <= self.tolerance

    def summary(self) -> str:
        status = "ok" if self.passed else "FAILED"
        worst = f" worst={self.worst_param}{list(self.worst_index or ())}" if self.worst_param else ""
        return f"{self.name}: {status} max_rel_error={self.max_rel_error:.3e} checked={self.checked}{worst}"


def relative_error(analytic: float, numeric: float, floor: float = ERROR_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradient_check(
    loss_fn: Callable[[], Tensor],
    params: ParamSet,
    name: str = "gradient-check",
    tolerance: float | None = None,
    epsilon: float | None = None,
    max_per_param: int = 12,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """
    Check ``d loss_fn() / d params`` on up to ``max_per_param`` coordinates per tensor.

    ``loss_fn`` must rebuild the graph (inputs included) from the current
    parameter values on every call.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    working = next(iter(params.values())).data.dtype
    tolerance = DEFAULT_TOLERANCE[working.name] if tolerance is None else tolerance
    eps_base = DEFAULT_EPSILON[working.name] if epsilon is None else epsilon
    report = GradCheckReport(name=name, tolerance=tolerance)

    params.zero_grad()
    loss_fn().backward()
    analytic = {
        pname: (t.grad.astype(np.float64) if t.grad is not None else np.zeros(t.shape))
        for pname, t in params.items()
    }
    params.zero_grad()

    params.cast(np.dtype("float64"))
    try:
        with precision("float64"), no_grad():
            for pname, tensor in params.items():
                worst_here = 0.0
                for index in _sample_indices(tensor.shape, max_per_param, rng):
                    original = float(tensor.data[index])
                    eps = eps_base * max(1.0, abs(original))
                    tensor.data[index] = original + eps
                    plus = float(loss_fn().data)
                    tensor.data[index] = original - eps
                    minus = float(loss_fn().data)
                    tensor.data[index] = original
                    error = relative_error(float(analytic[pname][index]), (plus - minus) / (2 * eps))
                    report.checked += 1
                    worst_here = max(worst_here, error)
                    if error > report.max_rel_error:
                        report.max_rel_error = error
                        report.worst_param = pname
                        report.worst_index = index
                report.per_param[pname] = worst_here
    finally:
        params.cast(working)

    log = logger.info if report.passed else logger.warning
    log(report.summary())
    return report


def _sample_indices(shape: tuple[int, ...], limit: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    size = int(np.prod(shape, dtype=np.int64))
    flat = np.arange(size) if size <= limit else np.sort(rng.choice(size, limit, replace=False))
    return [tuple(int(i) for i in np.unravel_index(int(f), shape)) for f in flat]
