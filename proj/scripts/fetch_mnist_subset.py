#!/usr/bin/env python3
"""Builds the bundled 10k-image MNIST subset under data/mnist/.

Source: the `mnist` npm package (https://www.npmjs.com/package/mnist,
MIT license), which ships 10,000 MNIST digits as per-class JSON arrays
of 784 floats in [0, 1]. The script repackages them as gzipped IDX
files with a deterministic shuffle so any prefix is roughly balanced.

Usage:
    npm pack mnist
    python3 scripts/fetch_mnist_subset.py mnist-1.1.0.tgz data/mnist
"""

import gzip
import json
import struct
import sys
import tarfile
from pathlib import Path

import numpy as np

SHUFFLE_SEED = 12345


def load_package(tgz_path: Path):
    images = []
    labels = []
    with tarfile.open(tgz_path, "r:gz") as tar:
        for digit in range(10):
            member = tar.extractfile(f"package/src/digits/{digit}.json")
            flat = np.asarray(json.load(member)["data"], dtype=np.float64)
            count = flat.size // 784
            imgs = np.rint(flat.reshape(count, 28, 28) * 255.0).astype(np.uint8)
            images.append(imgs)
            labels.append(np.full(count, digit, dtype=np.uint8))
    return np.concatenate(images), np.concatenate(labels)


def write_idx_images(path: Path, images: np.ndarray):
    header = struct.pack(">IIII", 0x00000803, images.shape[0], 28, 28)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        f.write(images.tobytes())


def write_idx_labels(path: Path, labels: np.ndarray):
    header = struct.pack(">II", 0x00000801, labels.shape[0])
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header)
        f.write(labels.tobytes())


def main():
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    tgz_path, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)

    images, labels = load_package(tgz_path)
    order = np.random.default_rng(SHUFFLE_SEED).permutation(len(labels))
    images, labels = images[order], labels[order]

    write_idx_images(out_dir / "train-images-idx3-ubyte.gz", images)
    write_idx_labels(out_dir / "train-labels-idx1-ubyte.gz", labels)
    counts = np.bincount(labels, minlength=10)
    print(f"wrote {len(labels)} samples to {out_dir}; per-class counts: {counts.tolist()}")


if __name__ == "__main__":
    main()
