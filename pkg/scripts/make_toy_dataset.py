#!/usr/bin/env python3
"""
Toy MNIST-format dataset for smoke runs and tests.

Writes the four IDX files of an MNIST split layout. Class 0 images light up the
top half of the frame, class 1 the bottom half, with uniform pixel jitter, so a
small network separates them within a few epochs.

    python scripts/make_toy_dataset.py OUT_DIR [--train N] [--test N] [--seed S]
"""

import argparse
import os
import struct
import sys

# Add the project root to Python path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import numpy as np

from etl.extraction import IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC, MNIST_FILES
from utils.logging_config import logger


def idx_bytes(array):
    """Encode a uint8 array as IDX: images [N, H, W] or labels [N]."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IDX_IMAGE_MAGIC if array.ndim == 3 else IDX_LABEL_MAGIC
    header = struct.pack(f">I{array.ndim}I", magic, *array.shape)
    return header + array.tobytes()


def toy_images(count, seed, size=28):
    gen = np.random.default_rng(seed)
    labels = np.arange(count) % 2
    images = gen.integers(0, 40, size=(count, size, size))
    half = size // 2
    for index, label in enumerate(labels):
        rows = slice(0, half) if label == 0 else slice(half, size)
        images[index, rows] = gen.integers(200, 256, size=(half, size))
    return images.astype(np.uint8), labels.astype(np.uint8)


def write_toy_mnist(out_dir, train=10, test=10, seed=0):
    os.makedirs(out_dir, exist_ok=True)
    for split, count, offset in (("train", train, 0), ("test", test, 1)):
        images, labels = toy_images(count, seed + offset)
        image_file, label_file = MNIST_FILES[split]
        with open(os.path.join(out_dir, image_file), "wb") as f:
            f.write(idx_bytes(images))
        with open(os.path.join(out_dir, label_file), "wb") as f:
            f.write(idx_bytes(labels))
    logger.info(f"[Toy] Wrote {train} train / {test} test images to {out_dir}")
    return out_dir


def main():
    parser = argparse.ArgumentParser(description="Write a toy MNIST-format dataset")
    parser.add_argument("out_dir")
    parser.add_argument("--train", type=int, default=10)
    parser.add_argument("--test", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    write_toy_mnist(args.out_dir, args.train, args.test, args.seed)


if __name__ == "__main__":
    main()
