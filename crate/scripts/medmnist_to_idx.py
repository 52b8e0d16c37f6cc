#!/usr/bin/env python3
"""Convert a MedMNIST .npz archive into idx split directories.

Usage: medmnist_to_idx.py breastmnist.npz data/breastmnist

Writes <out>/{train,val,test}/{images,labels}.idx. Labels must be binary.
"""
import argparse
import pathlib
import struct

import numpy as np


def write_idx(path, array, type_code=0x08):
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">BBBB", 0, 0, type_code, array.ndim)
    header += struct.pack(f">{array.ndim}I", *array.shape)
    path.write_bytes(header + array.tobytes())


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("npz", type=pathlib.Path)
    parser.add_argument("out", type=pathlib.Path)
    args = parser.parse_args()

    archive = np.load(args.npz)
    for split in ("train", "val", "test"):
        images = archive[f"{split}_images"]
        labels = archive[f"{split}_labels"].reshape(-1)
        if images.ndim != 3:
            raise SystemExit(f"{split}: expected grayscale images, got shape {images.shape}")
        if not set(np.unique(labels)) <= {0, 1}:
            raise SystemExit(f"{split}: labels are not binary")
        target = args.out / split
        target.mkdir(parents=True, exist_ok=True)
        write_idx(target / "images.idx", images)
        write_idx(target / "labels.idx", labels)
        print(f"{split}: {len(labels)} images -> {target}")


if __name__ == "__main__":
    main()
