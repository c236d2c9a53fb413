#!/usr/bin/env python3
"""Build the bundled desk-scale MNIST split from the `mnist` npm package.

The npm package (https://www.npmjs.com/package/mnist, MIT) ships 10,000 MNIST
digits as per-class JSON arrays of pixel/255 rounded to three decimals, which
maps back to the original 8-bit values exactly.

Each class is split 80/20 into train/test, both sets are shuffled with a fixed
seed, and written as gzip-compressed IDX files.

    npm pack mnist && tar xzf mnist-1.1.0.tgz
    python3 scripts/make_desk_mnist.py package/src/digits data/desk-mnist
"""
import gzip
import json
import random
import struct
import sys
from pathlib import Path

SIZE = 28 * 28


def dump(out, name, samples):
    img = bytearray(struct.pack(">IIII", 0x803, len(samples), 28, 28))
    lab = bytearray(struct.pack(">II", 0x801, len(samples)))
    for pixels, label in samples:
        img.extend(pixels)
        lab.append(label)
    for suffix, payload in (("images-idx3-ubyte", img), ("labels-idx1-ubyte", lab)):
        with open(out / f"{name}-{suffix}.gz", "wb") as raw:
            with gzip.GzipFile(fileobj=raw, mode="wb", mtime=0, filename="") as f:
                f.write(payload)


def main():
    digits, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    train, test = [], []
    for label in range(10):
        data = json.loads((digits / f"{label}.json").read_text())["data"]
        n = len(data) // SIZE
        samples = []
        for i in range(n):
            px = bytes(round(v * 255) for v in data[i * SIZE:(i + 1) * SIZE])
            samples.append((px, label))
        cut = (n * 4) // 5
        train += samples[:cut]
        test += samples[cut:]
    rng = random.Random(20210524)
    rng.shuffle(train)
    rng.shuffle(test)
    dump(out, "train", train)
    dump(out, "t10k", test)
    print(f"train={len(train)} test={len(test)}")


if __name__ == "__main__":
    main()
