#!/usr/bin/env python3
"""Plot the CSV files written by `atomlaser run` or `atomlaser sweep`.

Usage: plot_outputs.py OUTPUT_DIR [--run NAME] [--save DIR]

Profiles of one run are overlaid on a single axis, detector traces are drawn
with the delayed drive intensity, overlap sweeps and sweep summaries get their
own panels.
"""

import argparse
import pathlib
import re
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


# Run names may contain dots, so the run is whatever precedes the known suffix.
SUFFIX = re.compile(r"^(.*?)(\.(analytic|numeric)\.(profile|trace)\.\d+|\.(overlap|spectrum)\.\d+|\.sweep)\.csv$")


def read_csv(path):
    """Return (header comments, column names, data array)."""
    comments = []
    with open(path) as fh:
        line = fh.readline()
        while line.startswith("#"):
            comments.append(line[1:].strip())
            line = fh.readline()
        columns = line.strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=len(comments) + 1, ndmin=2)
    return comments, columns, data


def header_value(comments, key):
    for c in comments:
        for token in c.split():
            if token.startswith(key + "="):
                return token.split("=", 1)[1]
    return None


def plot_profiles(files, ax):
    for f in sorted(files, key=lambda p: float(header_value(read_csv(p)[0], "t_s") or 0)):
        comments, _, d = read_csv(f)
        label = "%s t=%.1f ms" % (header_value(comments, "engine"), 1e3 * float(header_value(comments, "t_s")))
        ax.plot(1e6 * d[:, 0], d[:, 1], label=label)
    ax.set_xlabel("x [um] (downward)")
    ax.set_ylabel("density [1/m]")
    ax.legend(fontsize="small")


def plot_trace(path, ax):
    comments, _, d = read_csv(path)
    ax.plot(1e3 * d[:, 0], d[:, 1], label="stream density")
    ax.ticklabel_format(axis="y", useOffset=False)
    ax.set_xlabel("t [ms]")
    ax.set_ylabel("density [1/m]")
    drive = ax.twinx()
    drive.plot(1e3 * d[:, 0], d[:, 2], color="grey", alpha=0.5, label="drive (delayed)")
    drive.set_ylabel("drive intensity")
    ax.set_title("detector at x = %s m" % header_value(comments, "x_m"), fontsize="small")


def plot_overlap(path, ax):
    _, _, d = read_csv(path)
    ax.plot(1e-3 * d[:, 0], d[:, 1])
    ax.set_xlabel("rf frequency [kHz]")
    ax.set_ylabel("overlap [J^-1/2]")


def plot_sweep(path, ax):
    comments, columns, d = read_csv(path)
    for k in range(1, d.shape[1]):
        if np.all(np.isfinite(d[:, k])):
            ax.plot(d[:, 0], d[:, k] / np.max(np.abs(d[:, k])), "o-", label=columns[k] + " (scaled)")
    ax.set_xlabel(header_value(comments, "axis") or "value")
    ax.legend(fontsize="small")


def main(argv):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("directory", type=pathlib.Path)
    ap.add_argument("--run", help="only plot files of this run name")
    ap.add_argument("--save", type=pathlib.Path, default=None, help="directory for PNG files (default: the input)")
    args = ap.parse_args(argv)

    out = args.save or args.directory
    out.mkdir(parents=True, exist_ok=True)
    runs = {}
    for f in sorted(args.directory.glob("*.csv")):
        m = SUFFIX.match(f.name)
        if not m:
            continue
        name = m.group(1)
        if args.run and name != args.run:
            continue
        runs.setdefault(name, []).append(f)
    if not runs:
        print("no CSV files found", file=sys.stderr)
        return 1

    for name, files in runs.items():
        profiles = [f for f in files if ".profile." in f.name]
        others = [f for f in files if f not in profiles]
        panels = (1 if profiles else 0) + len(others)
        fig, axes = plt.subplots(panels, 1, figsize=(7, 3.2 * panels), squeeze=False)
        axes = list(axes[:, 0])
        if profiles:
            plot_profiles(profiles, axes.pop(0))
        for f in others:
            ax = axes.pop(0)
            if ".trace." in f.name:
                plot_trace(f, ax)
            elif ".overlap." in f.name:
                plot_overlap(f, ax)
            elif f.name.endswith(".sweep.csv"):
                plot_sweep(f, ax)
            else:
                ax.set_visible(False)
        fig.suptitle(name)
        fig.tight_layout()
        target = out / (name + ".png")
        fig.savefig(target, dpi=120)
        plt.close(fig)
        print(target)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
