"""Deterministic toy model and dataset for the README walkthrough and tests.

``python -m proa.demo --out DIR`` writes toy_model.nnw (8x8x1 inputs,
one hidden layer, 3 classes) and a 16-image dataset whose labels mostly
agree with the model so a certify run produces a mix of verdicts.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from proa import container
from proa.classifier import BuiltinClassifier
from proa.cli import LABELS_FILENAME

INPUT_SHAPE = (8, 8, 1)
NUM_CLASSES = 3
NUM_IMAGES = 16


def build_demo(out_dir: str | Path, seed: int = 2024) -> tuple[Path, Path]:
    """Write the demo model and dataset; returns (model_path, dataset_dir)."""
    out = Path(out_dir)
    dataset_dir = out / "dataset"
    dataset_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    h, w, c = INPUT_SHAPE
    n_inputs = h * w * c
    hidden = 12
    layers = [
        (rng.normal(scale=0.6, size=(hidden, n_inputs)).astype(np.float32),
         rng.normal(scale=0.1, size=hidden).astype(np.float32)),
        (rng.normal(scale=0.6, size=(NUM_CLASSES, hidden)).astype(np.float32),
         rng.normal(scale=0.1, size=NUM_CLASSES).astype(np.float32)),
    ]
    model_path = out / "toy_model.nnw"
    container.save_nnw(model_path, INPUT_SHAPE, layers)

    model = BuiltinClassifier(
        INPUT_SHAPE, [container.LayerWeights(*l) for l in layers]
    )
    lines = []
    for i in range(NUM_IMAGES):
        pixels = rng.random(INPUT_SHAPE).astype(np.float32)
        name = f"img{i:02d}.imt"
        container.save_imt(dataset_dir / name, pixels)
        from proa.perturb import ImageTensor

        probs = model.predict_batch([ImageTensor(pixels)])[0]
        label = int(np.argmax(probs))
        if i % 5 == 4:  # sprinkle in wrong labels for misclassified rows
            label = (label + 1) % NUM_CLASSES
        lines.append(f"{name}\t{label}")
    (dataset_dir / LABELS_FILENAME).write_text("\n".join(lines) + "\n")
    return model_path, dataset_dir


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo", help="output directory")
    parser.add_argument("--seed", type=int, default=2024)
    args = parser.parse_args(argv)
    model_path, dataset_dir = build_demo(args.out, seed=args.seed)
    print(f"model:   {model_path}")
    print(f"dataset: {dataset_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
