"""
Bit-exact dataset ingestion: MNIST IDX files and CIFAR-10 / CIFAR-100 binary batches.
Pixels are scaled to [0, 1] by 1/255; nothing else is applied at load time.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np

from utils.errors import DatasetFormatError
from utils.logging_config import logger

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049
IDX_HEADER_LIMIT = 1 << 32  # refuse payloads declared larger than 4 GiB

CIFAR_PIXELS = 3 * 32 * 32
CIFAR10_RECORD = 1 + CIFAR_PIXELS
CIFAR100_RECORD = 2 + CIFAR_PIXELS
CIFAR10_RECORDS_PER_BATCH = 10000

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
CIFAR10_FILES = {
    "train": tuple(f"data_batch_{i}.bin" for i in range(1, 6)),
    "test": ("test_batch.bin",),
}
CIFAR100_FILES = {"train": ("train.bin",), "test": ("test.bin",)}

# Published per-class counts of the complete splits
PUBLISHED_CLASS_COUNTS = {
    ("mnist", "train"): [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949],
    ("mnist", "test"): [980, 1135, 1032, 1010, 982, 892, 958, 1028, 974, 1009],
    ("cifar10", "train"): [5000] * 10,
    ("cifar10", "test"): [1000] * 10,
    ("cifar100", "train"): [500] * 100,
    ("cifar100", "test"): [100] * 100,
}

NUM_CLASSES = {"mnist": 10, "cifar10": 10, "cifar100": 100}


@dataclass
class Dataset:
    name: str
    split: str
    images: np.ndarray  # [N, C, H, W] float32 in [0, 1]
    labels: np.ndarray  # [N] int64
    num_classes: int

    def __len__(self):
        return int(self.labels.shape[0])

    def subset(self, limit):
        """Leading subset of ``limit`` samples (0 keeps everything)."""
        if not limit or limit >= len(self):
            return self
        return Dataset(
            self.name,
            self.split,
            self.images[:limit],
            self.labels[:limit],
            self.num_classes,
        )


def _read_bytes(path):
    with open(path, "rb") as f:
        return f.read()


def parse_idx(raw, source="<bytes>"):
    """
    Parse a big-endian IDX buffer. Images (magic 2051) come back as float32
    [N, 1, H, W] scaled by 1/255, labels (magic 2049) as int64 [N].
    """
    if len(raw) < 4:
        raise DatasetFormatError(f"{source}: truncated IDX header ({len(raw)} bytes)")
    (magic,) = struct.unpack_from(">I", raw, 0)
    if magic == IDX_IMAGE_MAGIC:
        ndim = 3
    elif magic == IDX_LABEL_MAGIC:
        ndim = 1
    else:
        raise DatasetFormatError(
            f"{source}: bad IDX magic {magic:#010x}, expected 2051 or 2049"
        )

    header_size = 4 + 4 * ndim
    if len(raw) < header_size:
        raise DatasetFormatError(
            f"{source}: truncated IDX header, need {header_size} bytes, got {len(raw)}"
        )
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    count = 1
    for dim in dims:
        count *= dim
        if count > IDX_HEADER_LIMIT:
            raise DatasetFormatError(f"{source}: IDX dimensions {dims} overflow")
    if 0 in dims:
        raise DatasetFormatError(f"{source}: IDX dimensions {dims} contain zero")

    payload = len(raw) - header_size
    if payload < count:
        raise DatasetFormatError(
            f"{source}: truncated IDX payload, declared {count} bytes, found {payload}"
        )
    if payload > count:
        raise DatasetFormatError(
            f"{source}: {payload - count} trailing bytes after declared IDX payload"
        )

    data = np.frombuffer(raw, dtype=np.uint8, count=count, offset=header_size)
    if magic == IDX_LABEL_MAGIC:
        return data.astype(np.int64)
    n, rows, cols = dims
    images = data.reshape(n, 1, rows, cols).astype(np.float32) / np.float32(255.0)
    return images


def load_idx(path):
    """Load one IDX file (images or labels)."""
    logger.info(f"[Extraction] Reading IDX file {path}")
    return parse_idx(_read_bytes(path), source=str(path))


def parse_cifar(raw, record_size, source="<bytes>", max_label=9):
    """Split CIFAR records into float32 images [N, 3, 32, 32] and int64 labels."""
    if len(raw) == 0 or len(raw) % record_size:
        raise DatasetFormatError(
            f"{source}: size {len(raw)} is not a positive multiple of {record_size}"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record_size)
    # CIFAR-100 stores (coarse, fine); the fine label is the class
    labels = records[:, record_size - CIFAR_PIXELS - 1].astype(np.int64)
    if labels.max() > max_label:
        bad = int(np.argmax(labels > max_label))
        raise DatasetFormatError(
            f"{source}: record {bad} has label {labels[bad]} outside [0, {max_label}]"
        )
    pixels = records[:, record_size - CIFAR_PIXELS :]
    images = pixels.reshape(-1, 3, 32, 32).astype(np.float32) / np.float32(255.0)
    return images, labels


def load_cifar10(path):
    """Load one CIFAR-10 binary batch file (3073-byte records)."""
    logger.info(f"[Extraction] Reading CIFAR-10 batch {path}")
    return parse_cifar(_read_bytes(path), CIFAR10_RECORD, source=str(path), max_label=9)


def load_cifar100(path):
    """Load one CIFAR-100 binary file (3074-byte records, fine labels)."""
    logger.info(f"[Extraction] Reading CIFAR-100 file {path}")
    return parse_cifar(
        _read_bytes(path), CIFAR100_RECORD, source=str(path), max_label=99
    )


def _locate(data_dir, filename, subdirs):
    for sub in ("",) + subdirs:
        candidate = os.path.join(data_dir, sub, filename)
        if os.path.exists(candidate):
            return candidate
    raise DatasetFormatError(f"Missing dataset file {filename} under {data_dir}")


def verify_label_histogram(dataset):
    """Check a complete split against its published per-class counts."""
    expected = PUBLISHED_CLASS_COUNTS.get((dataset.name, dataset.split))
    if expected is None or len(dataset) != sum(expected):
        return
    counts = np.bincount(dataset.labels, minlength=dataset.num_classes).tolist()
    if counts != expected:
        raise DatasetFormatError(
            f"{dataset.name}/{dataset.split} label histogram {counts} does not match "
            f"the published counts"
        )


def load_dataset(name, data_dir, split):
    """Load a full split of a supported dataset from ``data_dir``."""
    if split not in ("train", "test"):
        raise DatasetFormatError(f"Unknown split {split!r}")
    try:
        if name == "mnist":
            image_file, label_file = MNIST_FILES[split]
            images = load_idx(_locate(data_dir, image_file, ("mnist",)))
            labels = load_idx(_locate(data_dir, label_file, ("mnist",)))
            if images.ndim != 4 or labels.ndim != 1:
                raise DatasetFormatError(
                    f"MNIST {split}: image/label files are swapped or malformed"
                )
            if images.shape[0] != labels.shape[0]:
                raise DatasetFormatError(
                    f"MNIST {split}: {images.shape[0]} images but {labels.shape[0]} labels"
                )
        elif name in ("cifar10", "cifar100"):
            files, loader, subdirs = (
                (CIFAR10_FILES[split], load_cifar10, ("cifar-10-batches-bin",))
                if name == "cifar10"
                else (CIFAR100_FILES[split], load_cifar100, ("cifar-100-binary",))
            )
            parts = [loader(_locate(data_dir, f, subdirs)) for f in files]
            images = np.concatenate([p[0] for p in parts])
            labels = np.concatenate([p[1] for p in parts])
        else:
            raise DatasetFormatError(f"Unknown dataset {name!r}")

        dataset = Dataset(name, split, images, labels, NUM_CLASSES[name])
        verify_label_histogram(dataset)
        logger.info(
            f"[Extraction] Loaded {name}/{split}: {len(dataset)} samples, "
            f"image shape {tuple(images.shape[1:])}"
        )
        return dataset
    except (DatasetFormatError, OSError):
        logger.error(f"[Extraction] Failed to load {name}/{split}", exc_info=True)
        raise
