"""Extract the small UCR datasets that ship inside the aeon and pyts wheels.

The UCR archive site is not always reachable, but several toolkits vendor
genuine train/test splits of a handful of univariate problems. This script
downloads the wheels with pip (no install) and rewrites each split as a
tab-separated UCR text file: ``label<TAB>x0<TAB>x1 ...``.

Usage::

    python scripts/fetch_ucr.py [--out data/ucr]
"""

import argparse
import glob
import subprocess
import sys
import tempfile
import zipfile
from pathlib import Path

AEON = {
    "ItalyPowerDemand": "aeon/datasets/data/ItalyPowerDemand/ItalyPowerDemand_{}.ts",
    "GunPoint": "aeon/datasets/data/GunPoint/GunPoint_{}.ts",
    "ArrowHead": "aeon/datasets/data/ArrowHead/ArrowHead_{}.ts",
    "ChinatownSubset": "aeon/datasets/data/UnitTest/UnitTest_{}.ts",
}
PYTS = {
    "Coffee": "pyts/datasets/cached_datasets/UCR/Coffee/Coffee_{}.txt",
}


def _ts_records(text):
    in_data = False
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("%"):
            continue
        if line.lower().startswith("@data"):
            in_data = True
            continue
        if not in_data:
            continue
        values, label = line.rsplit(":", 1)
        yield label, values.split(",")


def _txt_records(text):
    for line in text.splitlines():
        fields = line.split()
        if fields:
            yield str(int(float(fields[0]))), fields[1:]


def _write(path, records):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for label, values in records:
            fh.write("\t".join([label] + values) + "\n")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="data/ucr")
    args = parser.parse_args(argv)
    out = Path(args.out)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run(
            [sys.executable, "-m", "pip", "download", "--no-deps", "-q",
             "aeon==1.3.0", "pyts==0.13.0", "-d", tmp],
            check=True,
        )
        aeon = zipfile.ZipFile(glob.glob(f"{tmp}/aeon-*.whl")[0])
        pyts = zipfile.ZipFile(glob.glob(f"{tmp}/pyts-*.whl")[0])
        for sources, archive, parse in ((AEON, aeon, _ts_records), (PYTS, pyts, _txt_records)):
            for name, pattern in sources.items():
                for split in ("TRAIN", "TEST"):
                    text = archive.read(pattern.format(split)).decode()
                    _write(out / name / f"{name}_{split}.tsv", parse(text))
                print(f"wrote {out / name}")


if __name__ == "__main__":
    main()
