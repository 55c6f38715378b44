#!/usr/bin/env python3
"""Fetch MovieLens-100k and write it in the MovieLens-latest CSV layout.

The 100k ratings set is pulled out of the RecBole wheel on PyPI, which ships
it as tab-separated "atomic" files, and rewritten as

    movies.csv   movieId,title,genres      (genres pipe-separated)
    ratings.csv  userId,movieId,rating,timestamp

so that the same parser handles it and the larger ml-latest/ml-20m dumps.

Usage: scripts/fetch_movielens.py [OUT_DIR]   (default: data/ml-100k)
"""

import csv
import glob
import os
import subprocess
import sys
import tempfile
import zipfile

WHEEL = "recbole==1.2.1"
PREFIX = "recbole/dataset_example/ml-100k/"

# ml-100k spells one genre differently and uses "unknown" for untagged movies.
RENAME = {"Children's": "Children", "unknown": None}


def main() -> int:
    out_dir = sys.argv[1] if len(sys.argv) > 1 else os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "ml-100k")
    os.makedirs(out_dir, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.run([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                        WHEEL, "-d", tmp], check=True)
        wheel = glob.glob(os.path.join(tmp, "*.whl"))[0]
        with zipfile.ZipFile(wheel) as z:
            items = z.read(PREFIX + "ml-100k.item").decode("latin-1").splitlines()
            inter = z.read(PREFIX + "ml-100k.inter").decode("latin-1").splitlines()

    with open(os.path.join(out_dir, "movies.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["movieId", "title", "genres"])
        for line in items[1:]:
            movie_id, title, year, classes = line.split("\t")
            genres = [RENAME.get(g, g) for g in classes.split()]
            genres = [g for g in genres if g]
            if year:
                title = f"{title} ({year})"
            w.writerow([movie_id, title, "|".join(genres) or "(no genres listed)"])

    with open(os.path.join(out_dir, "ratings.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["userId", "movieId", "rating", "timestamp"])
        for line in inter[1:]:
            user, movie, rating, ts = line.split("\t")
            w.writerow([user, movie, f"{float(rating):.1f}", int(float(ts))])

    print(f"wrote {len(items) - 1} movies and {len(inter) - 1} ratings to {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
