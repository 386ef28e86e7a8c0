#!/usr/bin/env python3
# Copyright 2026 The fnproc Authors
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Converts the digit tables shipped with the `mnist` npm package into IDX files.

The npm package (MIT licensed, https://www.npmjs.com/package/mnist) bundles
10,000 MNIST digits as per-class JSON arrays of 28x28 intensities rounded to
three decimals. This script writes them as a standard IDX image/label pair:

    npm pack mnist && tar xzf mnist-*.tgz
    python3 tools/make_mnist_subset.py package/src/digits data/mnist-desk
"""
import json
import pathlib
import struct
import sys

SIDE = 28


def main(src: str, dst: str) -> None:
    src_dir = pathlib.Path(src)
    out_dir = pathlib.Path(dst)
    out_dir.mkdir(parents=True, exist_ok=True)
    pixels = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = json.loads((src_dir / f"{digit}.json").read_text())["data"]
        count = len(data) // (SIDE * SIDE)
        pixels.extend(min(255, max(0, round(v * 255))) for v in data[: count * SIDE * SIDE])
        labels.extend([digit] * count)
    n = len(labels)
    with open(out_dir / "images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, SIDE, SIDE))
        f.write(pixels)
    with open(out_dir / "labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels)
    print(f"wrote {n} images to {out_dir}")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} <digits-dir> <out-dir>")
    main(sys.argv[1], sys.argv[2])
