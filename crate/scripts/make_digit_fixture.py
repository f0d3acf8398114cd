"""Write N images (an equal share per digit class, interleaved) of the MNIST subset bundled with mlxtend as IDX files.

    pip download --no-deps mlxtend -d /tmp/mlx
    python3 scripts/make_digit_fixture.py /tmp/mlx/mlxtend-*.whl crates/core/tests/data 1000
"""
import gzip
import io
import struct
import sys
import zipfile

import numpy as np


def main():
    wheel, out_dir, count = sys.argv[1], sys.argv[2], int(sys.argv[3])
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    table = np.loadtxt(io.BytesIO(gzip.decompress(raw)), delimiter=",", dtype=np.uint8)
    per_class = count // 10
    picks = [np.flatnonzero(table[:, -1] == c)[:per_class] for c in range(10)]
    order = np.stack(picks, axis=1).reshape(-1)
    labels, images = table[order, -1], table[order, :-1]
    with open(f"{out_dir}/digits-images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x803, count, 28, 28))
        f.write(images.tobytes())
    with open(f"{out_dir}/digits-labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x801, count))
        f.write(labels.tobytes())


if __name__ == "__main__":
    main()
