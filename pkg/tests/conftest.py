"""Shared fixtures: rigged classifiers with known ground truth.

The rigs make the stability bit Z an exact Bernoulli(mu) by
construction, which is what lets the statistical guarantees be tested
against a known truth.
"""

from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from proa.classifier import ModelDescriptor, ModelKind
from proa.perturb import (
    Family,
    ImageTensor,
    PerturbationSpec,
    affine_transform,
    params_to_affine,
)


class ConstantClassifier:
    """Ignores its input; always returns the same probability vector."""

    def __init__(self, probs, input_shape=(1, 1, 1)):
        self._probs = np.asarray(probs, dtype=np.float64)
        self.descriptor = ModelDescriptor(
            kind=ModelKind.EXTERNAL, source="<constant>",
            num_classes=len(self._probs), input_shape=tuple(input_shape),
        )

    @property
    def input_shape(self):
        return self.descriptor.input_shape

    @property
    def num_classes(self):
        return self.descriptor.num_classes

    def predict_batch(self, images):
        return [self._probs.copy() for _ in images]


class PixelThresholdClassifier:
    """Two-class rig keyed to the value of a single pixel.

    With brightness perturbations on a constant 0.5 image over
    theta_b in [-0.3, 0.3], the perturbed pixel is 0.5 + theta_b, so
    choosing the threshold 0.5 + (0.3 - 0.6 * flip_fraction) makes the
    stability bit an exact Bernoulli(1 - flip_fraction).
    """

    def __init__(self, threshold: float, input_shape=(1, 1, 1)):
        self.threshold = threshold
        self.descriptor = ModelDescriptor(
            kind=ModelKind.EXTERNAL, source="<pixel-threshold>",
            num_classes=2, input_shape=tuple(input_shape),
        )

    @classmethod
    def for_flip_fraction(cls, flip_fraction: float) -> "PixelThresholdClassifier":
        return cls(threshold=0.5 + (0.3 - 0.6 * flip_fraction))

    @property
    def input_shape(self):
        return self.descriptor.input_shape

    @property
    def num_classes(self):
        return self.descriptor.num_classes

    def predict_batch(self, images):
        values = np.array([float(img.data.reshape(-1)[0]) for img in images])
        out = np.where(values[:, None] > self.threshold,
                       np.array([0.1, 0.9]), np.array([0.9, 0.1]))
        return list(out)


BRIGHTNESS_RIG_SPEC = PerturbationSpec(
    family=Family.BRIGHTNESS_CONTRAST,
    theta_box=((-0.3, 0.3), (0.0, 0.0)),
)

RIG_IMAGE = ImageTensor(np.full((1, 1, 1), 0.5))


class RotationFieldClassifier:
    """Two-class rig keyed to the rotation angle of an 8x8 pattern.

    The pattern 0.5 + 0.25*(x^2 - y^2) (normalised coordinates) has a
    statistic T = sum(weight * image) that is strictly decreasing in the
    rotation magnitude over [0, 35deg] (verified by the fixture);
    thresholding T at its 28deg value makes the flip region exactly the
    outer 20% of the [-35deg, 35deg] box.
    """

    def __init__(self, size: int = 8):
        ys, xs = np.meshgrid(
            np.linspace(-1.0, 1.0, size), np.linspace(-1.0, 1.0, size),
            indexing="ij",
        )
        self.weight = (xs**2 - ys**2)[..., None]
        self.image = ImageTensor(0.5 + 0.25 * self.weight)
        edge = affine_transform(
            self.image, params_to_affine(theta_r=math.radians(28.0))
        )
        self.threshold = self.statistic(edge)
        self.descriptor = ModelDescriptor(
            kind=ModelKind.EXTERNAL, source="<rotation-field>",
            num_classes=2, input_shape=(size, size, 1),
        )

    def statistic(self, image: ImageTensor) -> float:
        return float((self.weight * image.data).sum())

    @property
    def input_shape(self):
        return self.descriptor.input_shape

    @property
    def num_classes(self):
        return self.descriptor.num_classes

    def predict_batch(self, images):
        stats = np.array([self.statistic(img) for img in images])
        out = np.where(stats[:, None] >= self.threshold,
                       np.array([0.9, 0.1]), np.array([0.1, 0.9]))
        return list(out)


ROTATION_RIG_SPEC = PerturbationSpec(
    family=Family.ROTATION,
    theta_box=((-math.radians(35.0), math.radians(35.0)),),
)


@pytest.fixture(scope="session")
def rotation_rig():
    rig = RotationFieldClassifier()
    # The flip-measure argument needs T strictly decreasing in |angle|.
    angles = np.linspace(0.0, math.radians(35.0), 400)
    values = [
        rig.statistic(affine_transform(rig.image, params_to_affine(theta_r=a)))
        for a in angles
    ]
    assert np.all(np.diff(values) < 0.0), "rig statistic is not monotone"
    return rig


@pytest.fixture
def random_image():
    rng = np.random.default_rng(42)
    return ImageTensor(rng.random((8, 8, 3)))


@pytest.fixture
def random_gray_image():
    rng = np.random.default_rng(43)
    return ImageTensor(rng.random((8, 8, 1)))
