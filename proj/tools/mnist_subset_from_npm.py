#!/usr/bin/env python3
"""Convert the 10,000-digit MNIST subset shipped in the npm ``mnist`` package to IDX files.

Usage:
    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/mnist_subset_from_npm.py package/src/digits data/mnist-subset

The package stores a variable number of images per digit (10,000 in total). For each
digit the first 80% go to the train files and the rest to the test files; within each
file images are interleaved round-robin by class so any prefix is roughly balanced.
"""
import argparse
import json
import pathlib
import struct

ROWS = COLS = 28
TRAIN_FRACTION = 0.8


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), ROWS, COLS))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("digits_dir", type=pathlib.Path)
    ap.add_argument("out_dir", type=pathlib.Path)
    args = ap.parse_args()

    per_digit = []
    for d in range(10):
        data = json.loads((args.digits_dir / f"{d}.json").read_text())["data"]
        assert len(data) % (ROWS * COLS) == 0, f"digit {d}: unexpected size"
        imgs = []
        for k in range(len(data) // (ROWS * COLS)):
            px = data[k * ROWS * COLS:(k + 1) * ROWS * COLS]
            imgs.append([min(255, max(0, round(v * 255))) for v in px])
        per_digit.append(imgs)

    def interleave(groups):
        images, labels = [], []
        for k in range(max(len(g) for g in groups)):
            for d, g in enumerate(groups):
                if k < len(g):
                    images.append(g[k])
                    labels.append(d)
        return images, labels

    args.out_dir.mkdir(parents=True, exist_ok=True)
    cut = [int(len(g) * TRAIN_FRACTION) for g in per_digit]
    tr_x, tr_y = interleave([g[:c] for g, c in zip(per_digit, cut)])
    te_x, te_y = interleave([g[c:] for g, c in zip(per_digit, cut)])
    write_images(args.out_dir / "train-images-idx3-ubyte", tr_x)
    write_labels(args.out_dir / "train-labels-idx1-ubyte", tr_y)
    write_images(args.out_dir / "t10k-images-idx3-ubyte", te_x)
    write_labels(args.out_dir / "t10k-labels-idx1-ubyte", te_y)
    print(f"wrote {len(tr_y)} train / {len(te_y)} test examples to {args.out_dir}")


if __name__ == "__main__":
    main()
