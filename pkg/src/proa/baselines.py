"""Fixed-budget and empirical robustness evaluators.

``ac_certify`` spends a predetermined sample budget and decides from the
fixed-sample binomial interval; ``grid_accuracy`` and
``random_accuracy`` are the zero-tolerance adversary searches, which
test argmax preservation rather than the stricter margin criterion used
by the adaptive certifier.
"""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from proa import classifier as classifier_mod
from proa.perturb import ImageTensor, PerturbationSpec, apply, sample_theta
from proa.stats import agresti_coull_interval
from proa.verifier import Verdict, VerifyOutcome, clean_margin, draw_thetas

__all__ = ["ac_certify", "grid_accuracy", "random_accuracy"]

_CHUNK = 256


def _predict_thetas(model, image, spec, thetas) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for start in range(0, len(thetas), _CHUNK):
        chunk = thetas[start : start + _CHUNK]
        images = [apply(spec, theta, image) for theta in chunk]
        out.extend(classifier_mod.predict_batch(model, images))
    return out


def ac_certify(
    model: classifier_mod.Classifier,
    image: ImageTensor,
    label: int,
    spec: PerturbationSpec,
    n_fixed: int,
    tau: float,
    delta: float,
    seed: int = 0,
    image_index: int = 0,
) -> VerifyOutcome:
    """Fixed-sample certification via the binomial interval.

    Draws exactly n_fixed parameters, counts stability successes, and
    certifies iff the interval's lower limit clears 1 - tau (rejects iff
    the upper limit falls below it).  The reported mu_hat/epsilon are
    the interval midpoint and half-width, so the verdict can be re-derived
    from them with the same H0/H1 arithmetic as the adaptive path.
    """
    if n_fixed < 1:
        raise ValueError(f"n_fixed must be >= 1, got {n_fixed}")
    start_time = time.perf_counter()
    context = clean_margin(model, image, label)
    if not context.hit:
        return VerifyOutcome(Verdict.MISCLASSIFIED, 0.0, 1.0, 0, context.d,
                             time.perf_counter() - start_time)

    thetas = list(draw_thetas(spec, seed, image_index, 0, n_fixed))
    probs = _predict_thetas(model, image, spec, thetas)
    deviations = np.abs(np.stack(probs) - context.p).max(axis=1)
    successes = int((deviations < context.d).sum())

    lower, upper = agresti_coull_interval(successes, n_fixed, alpha=delta)
    if lower >= 1.0 - tau:
        verdict = Verdict.CERTIFIED
    elif upper < 1.0 - tau:
        verdict = Verdict.VIOLATED
    else:
        verdict = Verdict.UNDETERMINED
    return VerifyOutcome(
        verdict=verdict,
        mu_hat=(lower + upper) / 2.0,
        epsilon=(upper - lower) / 2.0,
        samples_used=n_fixed,
        margin_d=context.d,
        wall_time=time.perf_counter() - start_time,
    )


def _argmax_preserved(model, image, spec, thetas, label: int) -> bool:
    for start in range(0, len(thetas), _CHUNK):
        chunk = thetas[start : start + _CHUNK]
        images = [apply(spec, theta, image) for theta in chunk]
        probs = classifier_mod.predict_batch(model, images)
        if any(int(np.argmax(q)) != label for q in probs):
            return False
    return True


def grid_accuracy(
    model: classifier_mod.Classifier,
    image: ImageTensor,
    label: int,
    spec: PerturbationSpec,
    grid_points_per_dim: int,
) -> int:
    """1 iff clean-correct and no grid point flips the predicted class.

    The grid is the Cartesian product of evenly spaced values per box
    dimension, endpoints included.  This approximates the zero-tolerance
    notion of robustness and is blind to flip regions that fall between
    grid points.  Misclassified clean inputs score 0.
    """
    if grid_points_per_dim < 2:
        raise ValueError(
            f"grid needs at least 2 points per dimension, got {grid_points_per_dim}"
        )
    if not clean_margin(model, image, label).hit:
        return 0
    axes = [
        np.linspace(lo, hi, grid_points_per_dim) for lo, hi in spec.theta_box
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return int(_argmax_preserved(model, image, spec, list(thetas), label))


def random_accuracy(
    model: classifier_mod.Classifier,
    image: ImageTensor,
    label: int,
    spec: PerturbationSpec,
    n_random: int,
    stream: np.random.Generator,
) -> int:
    """1 iff clean-correct and no sampled parameter flips the class."""
    if n_random < 1:
        raise ValueError(f"n_random must be >= 1, got {n_random}")
    if not clean_margin(model, image, label).hit:
        return 0
    thetas = [sample_theta(spec, stream) for _ in range(n_random)]
    return int(_argmax_preserved(model, image, spec, thetas, label))
