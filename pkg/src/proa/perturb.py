"""Parametric image perturbations and their parameter boxes.

Every perturbation is a pure function of (image, theta) that preserves the
image dimensions and clamps intensities back into [0, 1].  Geometric
families (rotation, translation, scaling) share one affine resampling
path: the parameters build a 2x3 matrix over the normalised square
[-1, 1]^2, and each output pixel is the bilinear blend of the source at
the mapped coordinate, with reads outside the square contributing zero.

Colour families operate in hue/saturation/brightness space; blur is a
separable Gaussian of variance theta_g truncated at ceil(3*sqrt(theta_g))
taps per side and renormalised, with edge replication at the borders.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from proa import kernels

__all__ = [
    "Family",
    "ImageTensor",
    "PerturbationSpec",
    "FAMILY_DIMS",
    "DEFAULT_BOXES",
    "PRESET_BOXES",
    "sample_theta",
    "params_to_affine",
    "affine_transform",
    "gaussian_blur",
    "gaussian_kernel_1d",
    "hue_shift",
    "saturation_shift",
    "brightness_contrast",
    "apply",
]

TWO_PI = 2.0 * math.pi


class Family(str, Enum):
    """Perturbation families; values double as their CLI names."""

    ROTATION = "rotation"
    TRANSLATION = "translation"
    SCALING = "scaling"
    HUE = "hue"
    SATURATION = "saturation"
    BRIGHTNESS_CONTRAST = "brightness_contrast"
    GAUSSIAN_BLUR = "gaussian_blur"


FAMILY_DIMS = {
    Family.ROTATION: 1,
    Family.TRANSLATION: 2,
    Family.SCALING: 1,
    Family.HUE: 1,
    Family.SATURATION: 1,
    Family.BRIGHTNESS_CONTRAST: 2,
    Family.GAUSSIAN_BLUR: 1,
}

_DEG35 = math.radians(35.0)
_DEG30 = math.radians(30.0)

# Default parameter boxes (the wider CIFAR presets).  Angles in radians,
# translation in normalised grid units, the rest dimensionless fractions.
DEFAULT_BOXES: dict[Family, tuple[tuple[float, float], ...]] = {
    Family.ROTATION: ((-_DEG35, _DEG35),),
    Family.TRANSLATION: ((-0.3, 0.3), (-0.3, 0.3)),
    Family.SCALING: ((0.7, 1.3),),
    Family.HUE: ((-math.pi / 2.0, math.pi / 2.0),),
    Family.SATURATION: ((-0.3, 0.3),),
    Family.BRIGHTNESS_CONTRAST: ((-0.3, 0.3), (-0.3, 0.3)),
    Family.GAUSSIAN_BLUR: ((0.0, 9.0),),
}

# Alternative published ranges, kept as named presets.
PRESET_BOXES: dict[str, dict[Family, tuple[tuple[float, float], ...]]] = {
    "default": DEFAULT_BOXES,
    "narrow": {
        **DEFAULT_BOXES,
        Family.ROTATION: ((-_DEG30, _DEG30),),
        Family.HUE: ((-math.pi / 3.0, math.pi / 3.0),),
        Family.SATURATION: ((-0.5, 0.5),),
    },
}


@dataclass(frozen=True, eq=False)
class ImageTensor:
    """An H x W x C block of unit-interval intensities (C is 1 or 3)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"image must be H x W x C, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"channel count must be 1 or 3, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"empty image: shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite intensities")
        lo = float(arr.min())
        hi = float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(
                f"intensities must lie in [0, 1], found range [{lo}, {hi}]"
            )
        object.__setattr__(self, "data", arr)

    @classmethod
    def _from_validated(cls, data: np.ndarray) -> "ImageTensor":
        # Fast path for perturbation outputs, which are clamped float64
        # arrays by construction; skips the range re-check.
        obj = object.__new__(cls)
        object.__setattr__(obj, "data", data)
        return obj

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class PerturbationSpec:
    """A family plus the box of parameter values to certify against."""

    family: Family
    theta_box: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self) -> None:
        family = Family(self.family)
        box = self.theta_box or DEFAULT_BOXES[family]
        box = tuple((float(lo), float(hi)) for lo, hi in box)
        if len(box) != FAMILY_DIMS[family]:
            raise ValueError(
                f"{family.value} takes {FAMILY_DIMS[family]} parameter(s), "
                f"box has {len(box)}"
            )
        for lo, hi in box:
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
                raise ValueError(f"invalid box dimension ({lo}, {hi})")
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "theta_box", box)

    @property
    def dims(self) -> int:
        return len(self.theta_box)


def sample_theta(spec: PerturbationSpec, stream: np.random.Generator) -> np.ndarray:
    """Draw one parameter vector uniformly from the spec's box."""
    lows = np.array([lo for lo, _ in spec.theta_box])
    highs = np.array([hi for _, hi in spec.theta_box])
    return stream.uniform(lows, highs)


def params_to_affine(
    theta_r: float = 0.0,
    theta_t: tuple[float, float] = (0.0, 0.0),
    theta_s: float = 1.0,
) -> np.ndarray:
    """2x3 matrix scaling and rotating about the centre, then translating.

    Operates on normalised coordinates in [-1, 1]^2; theta_r is in
    radians and theta_s must be positive.
    """
    if theta_s <= 0.0:
        raise ValueError(f"scale factor must be positive, got {theta_s}")
    cos_r = math.cos(theta_r)
    sin_r = math.sin(theta_r)
    tx, ty = theta_t
    return np.array(
        [
            [theta_s * cos_r, -theta_s * sin_r, tx],
            [theta_s * sin_r, theta_s * cos_r, ty],
        ],
        dtype=np.float64,
    )


def _index_space_matrix(m: np.ndarray, height: int, width: int) -> np.ndarray:
    """Rewrite a normalised-coordinate matrix as a pixel-index mapping.

    Pixel centres sit at -1 + 2*i/(n-1) along each axis, so the change of
    variables is affine; composing it analytically keeps the identity
    matrix exact in floating point (index maps to itself with no rounding
    detour through [-1, 1]).
    """
    ax = (width - 1) / 2.0
    ay = (height - 1) / 2.0
    rx = ax / ay if ay > 0.0 else 0.0  # axis collapsed: that term is 0 anyway
    ry = ay / ax if ax > 0.0 else 0.0
    return np.array(
        [
            [m[0, 0], m[0, 1] * rx, ax * (m[0, 2] + 1.0 - m[0, 0] - m[0, 1])],
            [m[1, 0] * ry, m[1, 1], ay * (m[1, 2] + 1.0 - m[1, 0] - m[1, 1])],
        ],
        dtype=np.float64,
    )


def affine_transform(image: ImageTensor, m: np.ndarray) -> ImageTensor:
    """Resample the image through the inverse (target -> source) map m."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (2, 3) or not np.isfinite(m).all():
        raise ValueError("affine matrix must be a finite 2x3 array")
    idx = _index_space_matrix(m, image.height, image.width)
    return ImageTensor._from_validated(kernels.affine_warp(image.data, idx))


def gaussian_kernel_1d(theta_g: float) -> np.ndarray:
    """Discrete Gaussian of variance theta_g, truncated and renormalised."""
    if theta_g < 0.0:
        raise ValueError(f"blur variance must be nonnegative, got {theta_g}")
    if theta_g == 0.0:
        return np.array([1.0])
    radius = math.ceil(3.0 * math.sqrt(theta_g))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(offsets**2) / (2.0 * theta_g))
    return kernel / kernel.sum()


def gaussian_blur(image: ImageTensor, theta_g: float) -> ImageTensor:
    """Separable Gaussian blur with variance theta_g; 0 is the identity."""
    kernel = gaussian_kernel_1d(theta_g)
    if len(kernel) == 1:
        return image
    return ImageTensor._from_validated(kernels.separable_blur(image.data, kernel))


def _require_color(image: ImageTensor, op: str) -> None:
    if image.channels != 3:
        raise ValueError(f"{op} requires a 3-channel image, got {image.channels}")


def hue_shift(image: ImageTensor, theta_h: float) -> ImageTensor:
    """Rotate every pixel's hue by theta_h radians around the colour wheel."""
    _require_color(image, "hue_shift")
    hsb = kernels.rgb_to_hsb(image.data)
    hsb[..., 0] = (hsb[..., 0] + theta_h / TWO_PI) % 1.0
    return ImageTensor._from_validated(np.clip(kernels.hsb_to_rgb(hsb), 0.0, 1.0))


def saturation_shift(image: ImageTensor, theta_s: float) -> ImageTensor:
    """Scale per-pixel saturation by (1 + theta_s), clamped to [0, 1]."""
    _require_color(image, "saturation_shift")
    if theta_s < -1.0:
        raise ValueError(f"saturation shift must be >= -1, got {theta_s}")
    hsb = kernels.rgb_to_hsb(image.data)
    hsb[..., 1] = np.clip((1.0 + theta_s) * hsb[..., 1], 0.0, 1.0)
    return ImageTensor._from_validated(np.clip(kernels.hsb_to_rgb(hsb), 0.0, 1.0))


def brightness_contrast(
    image: ImageTensor, theta_b: float, theta_c: float
) -> ImageTensor:
    """Per-pixel clamp((1 + theta_c) * x + theta_b, 0, 1) in unit scale."""
    if 1.0 + theta_c <= 0.0:
        raise ValueError(f"contrast parameter must exceed -1, got {theta_c}")
    return ImageTensor._from_validated(
        np.clip((1.0 + theta_c) * image.data + theta_b, 0.0, 1.0)
    )


def apply(
    spec: PerturbationSpec, theta: Sequence[float], image: ImageTensor
) -> ImageTensor:
    """Apply the spec's family at the given parameter vector."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (spec.dims,):
        raise ValueError(
            f"{spec.family.value} takes {spec.dims} parameter(s), "
            f"got shape {theta.shape}"
        )
    family = spec.family
    if family is Family.ROTATION:
        return affine_transform(image, params_to_affine(theta_r=theta[0]))
    if family is Family.TRANSLATION:
        return affine_transform(
            image, params_to_affine(theta_t=(theta[0], theta[1]))
        )
    if family is Family.SCALING:
        return affine_transform(image, params_to_affine(theta_s=theta[0]))
    if family is Family.HUE:
        return hue_shift(image, theta[0])
    if family is Family.SATURATION:
        return saturation_shift(image, theta[0])
    if family is Family.BRIGHTNESS_CONTRAST:
        return brightness_contrast(image, theta[0], theta[1])
    if family is Family.GAUSSIAN_BLUR:
        return gaussian_blur(image, theta[0])
    raise ValueError(f"unknown family {family!r}")
