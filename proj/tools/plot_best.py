# Copyright 2026 The archgen Authors.
#
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

"""Plot best_fitness.tsv files written by `archgen report`.

usage: plot_best.py RUN_DIR [RUN_DIR ...] [-o best.png]
"""

import argparse
import csv
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_series(run_dir):
    with open(pathlib.Path(run_dir) / "best_fitness.tsv", newline="") as f:
        rows = list(csv.DictReader(f, delimiter="\t"))
    gens = [int(r["generation"]) for r in rows]
    return gens, {k: [float(r[k]) for r in rows] for k in ("best_so_far", "best", "mean")}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("runs", nargs="+")
    ap.add_argument("-o", "--out", default="best_fitness.png")
    ap.add_argument("--mean", action="store_true", help="also draw the population mean")
    args = ap.parse_args()

    fig, ax = plt.subplots(figsize=(6, 4))
    for run in args.runs:
        gens, s = read_series(run)
        line, = ax.plot(gens, s["best_so_far"], label=pathlib.Path(run).name)
        if args.mean:
            ax.plot(gens, s["mean"], linestyle=":", color=line.get_color())
    ax.set_xlabel("generation")
    ax.set_ylabel("best fitness so far")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)


if __name__ == "__main__":
    main()
