"""The adaptive certification loop and the dataset-level harness.

For one (image, label) pair the loop:

1. asks the classifier for the clean output p, takes the margin
   d = (top1 - top2)/2, and short-circuits to ``misclassified`` when the
   clean prediction is already wrong;
2. repeatedly draws batches of n0 perturbation parameters, applies them,
   and records the stability bit Z = 1[max_k |p_k - p'_k| < d];
3. after each batch updates mu_hat = mean(Z), the anytime bound
   eps(delta, J), and the hypothesis verdict, stopping on a decision or
   when the next batch would exceed n_max.

Sampling is reproducible by construction: the parameter draw for sample
index i of image m is seeded by (seed, m, i), so results are independent
of batch partitioning and of how workers are scheduled.
"""

from __future__ import annotations

import hashlib
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from proa import classifier as classifier_mod
from proa import stats
from proa.perturb import ImageTensor, PerturbationSpec, apply

__all__ = [
    "Verdict",
    "VerifyConfig",
    "VerifyOutcome",
    "MarginContext",
    "clean_margin",
    "margin",
    "stability_indicator",
    "draw_thetas",
    "run_adaptive_loop",
    "certify",
    "certify_dataset",
    "DatasetItem",
    "ImageRecord",
    "DatasetResult",
]


class Verdict(str, Enum):
    CERTIFIED = "certified"
    VIOLATED = "violated"
    UNDETERMINED = "undetermined"
    MISCLASSIFIED = "misclassified"


_VERDICT_FOR_TEST = {
    stats.TestVerdict.CERTIFIED_HOLDS: Verdict.CERTIFIED,
    stats.TestVerdict.CERTIFIED_VIOLATED: Verdict.VIOLATED,
}


@dataclass(frozen=True)
class VerifyConfig:
    """Sampling parameters of one certification run."""

    tau: float = 0.05
    delta: float = 1e-4
    n0: int = 100
    n_max: int = 10_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.tau < 1.0:
            raise ValueError(f"tau must be in [0, 1), got {self.tau}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 1 <= self.n0 <= self.n_max:
            raise ValueError(
                f"need 1 <= n0 <= n_max, got n0={self.n0}, n_max={self.n_max}"
            )

    def params(self) -> stats.ConfidenceParams:
        return stats.ConfidenceParams(delta=self.delta, tau=self.tau)


@dataclass(frozen=True)
class VerifyOutcome:
    verdict: Verdict
    mu_hat: float
    epsilon: float
    samples_used: int
    margin_d: float
    wall_time: float

    def deterministic_fields(self) -> tuple:
        """Everything except the measured wall time."""
        return (
            self.verdict,
            self.mu_hat,
            self.epsilon,
            self.samples_used,
            self.margin_d,
        )


@dataclass(frozen=True)
class MarginContext:
    """Clean-input facts the loop tests against: output vector, margin,
    and whether the clean prediction matched the label."""

    p: np.ndarray
    d: float
    hit: bool


def clean_margin(
    model: classifier_mod.Classifier, image: ImageTensor, label: int
) -> MarginContext:
    p = classifier_mod.predict_batch(model, [image])[0]
    return MarginContext(p=p, d=margin(p), hit=int(np.argmax(p)) == label)


def margin(p: np.ndarray) -> float:
    """Half the gap between the two largest entries of p."""
    p = np.asarray(p, dtype=np.float64)
    if p.shape[-1] < 2:
        raise ValueError("need at least 2 classes")
    top2 = np.partition(p, -2)[-2:]
    return float(top2[1] - top2[0]) / 2.0


def stability_indicator(p: np.ndarray, p_f: np.ndarray, d: float) -> int:
    """1 iff no class probability moved by d or more (strict; d=0 gives 0)."""
    p = np.asarray(p, dtype=np.float64)
    p_f = np.asarray(p_f, dtype=np.float64)
    if p.shape != p_f.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {p_f.shape}")
    return int(np.abs(p - p_f).max() < d)


def _sample_uniforms(
    seed: int, image_index: int, sample_index: int, dims: int
) -> list[float]:
    """Uniform [0, 1) coordinates for one draw, straight from a hash.

    Hashing (seed, image, sample) gives every sample index its own
    stream, so results cannot depend on batch partitioning or worker
    scheduling.
    """
    digest = hashlib.blake2b(
        struct.pack("<Qqq", seed % 2**64, image_index, sample_index),
        digest_size=8 * dims,
    ).digest()
    return [
        (int.from_bytes(digest[8 * k : 8 * k + 8], "little") >> 11) * 2.0**-53
        for k in range(dims)
    ]


def draw_thetas(
    spec: PerturbationSpec,
    seed: int,
    image_index: int,
    start: int,
    count: int,
) -> np.ndarray:
    """Parameter vectors for sample indices [start, start + count)."""
    lows = np.array([lo for lo, _ in spec.theta_box])
    widths = np.array([hi - lo for lo, hi in spec.theta_box])
    raw = np.array(
        [
            _sample_uniforms(seed, image_index, start + k, spec.dims)
            for k in range(count)
        ]
    )
    return lows + raw * widths


@dataclass(frozen=True)
class LoopResult:
    verdict: Verdict
    mu_hat: float
    epsilon: float
    samples_used: int


def run_adaptive_loop(
    draw_batch: Callable[[int, int], np.ndarray], config: VerifyConfig
) -> LoopResult:
    """Run the sequential test over batches of stability bits.

    ``draw_batch(start, count)`` must return the 0/1 bits for sample
    indices [start, start + count).  The loop always consumes whole
    batches of n0, so samples_used is a multiple of n0 bounded by n_max.
    """
    params = config.params()
    successes = 0
    consumed = 0
    mu_hat = 0.0
    epsilon = 1.0
    while consumed + config.n0 <= config.n_max:
        bits = np.asarray(draw_batch(consumed, config.n0))
        successes += int(bits.sum())
        consumed += config.n0
        mu_hat = successes / consumed
        epsilon = stats.adaptive_epsilon(params, consumed).epsilon
        decision = stats.hypothesis_decision(mu_hat, epsilon, config.tau)
        if decision is not stats.TestVerdict.UNDECIDED:
            return LoopResult(
                _VERDICT_FOR_TEST[decision], mu_hat, epsilon, consumed
            )
    return LoopResult(Verdict.UNDETERMINED, mu_hat, epsilon, consumed)


def certify(
    model: classifier_mod.Classifier,
    image: ImageTensor,
    label: int,
    spec: PerturbationSpec,
    config: VerifyConfig,
    image_index: int = 0,
) -> VerifyOutcome:
    """Certify one (image, label) pair against one perturbation family."""
    start_time = time.perf_counter()
    context = clean_margin(model, image, label)
    p, d = context.p, context.d
    if not context.hit:
        return VerifyOutcome(
            verdict=Verdict.MISCLASSIFIED,
            mu_hat=0.0,
            epsilon=1.0,
            samples_used=0,
            margin_d=d,
            wall_time=time.perf_counter() - start_time,
        )

    def draw_batch(start: int, count: int) -> np.ndarray:
        thetas = draw_thetas(spec, config.seed, image_index, start, count)
        perturbed = [apply(spec, theta, image) for theta in thetas]
        probs = classifier_mod.predict_batch(model, perturbed)
        deviations = np.abs(np.stack(probs) - p).max(axis=1)
        return (deviations < d).astype(np.uint8)

    result = run_adaptive_loop(draw_batch, config)
    return VerifyOutcome(
        verdict=result.verdict,
        mu_hat=result.mu_hat,
        epsilon=result.epsilon,
        samples_used=result.samples_used,
        margin_d=d,
        wall_time=time.perf_counter() - start_time,
    )


@dataclass(frozen=True)
class DatasetItem:
    """One dataset entry; ``index`` keys the sampling streams, so an
    item's outcome does not depend on its position in the list."""

    image: ImageTensor
    label: int
    index: int
    name: str = ""


@dataclass(frozen=True)
class ImageRecord:
    item: DatasetItem
    outcome: VerifyOutcome | None = None
    error: str | None = None


@dataclass(frozen=True)
class DatasetResult:
    records: tuple[ImageRecord, ...]
    counts: dict[Verdict, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return len(self.records)

    @property
    def error_count(self) -> int:
        return sum(1 for r in self.records if r.error is not None)

    @property
    def certified_accuracy(self) -> float:
        if not self.records:
            return 0.0
        return self.counts.get(Verdict.CERTIFIED, 0) / len(self.records)


def _normalise_items(dataset: Sequence) -> list[DatasetItem]:
    items = []
    for pos, entry in enumerate(dataset):
        if isinstance(entry, DatasetItem):
            items.append(entry)
        else:
            image, label = entry
            items.append(DatasetItem(image=image, label=int(label), index=pos,
                                     name=f"image-{pos}"))
    return items


def certify_dataset(
    model: classifier_mod.Classifier,
    dataset: Sequence,
    spec: PerturbationSpec,
    config: VerifyConfig,
    workers: int = 1,
) -> DatasetResult:
    """Certify every item; per-image failures are recorded, not raised."""
    items = _normalise_items(dataset)
    if not items:
        raise ValueError("dataset is empty")

    def run_one(item: DatasetItem) -> ImageRecord:
        try:
            outcome = certify(model, item.image, item.label, spec, config,
                              image_index=item.index)
            return ImageRecord(item=item, outcome=outcome)
        except classifier_mod.ModelError as exc:
            return ImageRecord(item=item, error=str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run_one, items))
    else:
        records = [run_one(item) for item in items]

    counts = {verdict: 0 for verdict in Verdict}
    for record in records:
        if record.outcome is not None:
            counts[record.outcome.verdict] += 1
    return DatasetResult(records=tuple(records), counts=counts)
