"""Write a small MNIST subset in IDX format.

Source: the 5,000-image MNIST sample bundled with mlxtend
(mlxtend/data/data/mnist_5k.csv.gz, BSD-3-Clause). The rows there are
grouped by class, so they are permuted with a fixed seed before slicing.

    python3 make_subset.py path/to/mlxtend-*.whl
"""
import gzip
import random
import struct
import sys
import zipfile

TRAIN, TEST = 1000, 500


def write_images(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(rows), 28, 28))
        for pixels, _ in rows:
            f.write(bytes(pixels))


def write_labels(path, rows):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(rows)))
        f.write(bytes(label for _, label in rows))


def main(wheel):
    raw = zipfile.ZipFile(wheel).read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = []
    for line in gzip.decompress(raw).decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        rows.append((vals[:784], vals[784]))
    random.Random(4711).shuffle(rows)
    out = "mnist-subset/"
    write_images(out + "train-images-idx3-ubyte", rows[:TRAIN])
    write_labels(out + "train-labels-idx1-ubyte", rows[:TRAIN])
    write_images(out + "t10k-images-idx3-ubyte", rows[TRAIN:TRAIN + TEST])
    write_labels(out + "t10k-labels-idx1-ubyte", rows[TRAIN:TRAIN + TEST])


if __name__ == "__main__":
    main(sys.argv[1])
