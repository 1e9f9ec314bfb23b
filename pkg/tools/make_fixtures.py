"""Regenerate the bundled dataset fixtures under src/icamixture/datasets/.

Run from the repository root:  python tools/make_fixtures.py

iris and wine are exported from scikit-learn's bundled copies (sklearn is
a tool here, not a package dependency). The tone fixture is a simulation
of the classic tone-perception experiment design: in each trial a
musician hears a fundamental plus overtones stretched by a given ratio
and tunes an adjustable tone to one octave above the fundamental; the two
competing response strategies are tuning to the memorized 2:1 octave
(flat line at 2) or matching the stretched partials (line y = x). The
original per-trial measurements are not redistributable here, so this
file draws 150 trials from the two theoretical strategy lines with small
response noise instead.
"""

import csv
from pathlib import Path

import numpy as np
from sklearn.datasets import load_iris, load_wine

OUT = Path(__file__).resolve().parent.parent / "src" / "icamixture" / "datasets"

TONE_SEED = 20240809
TONE_TRIALS = 150
TONE_NOISE_SD = 0.07


def write(name, header, rows):
    with open(OUT / f"{name}.csv", "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)
    print(f"wrote {name}.csv ({len(rows)} rows)")


def make_iris():
    bundle = load_iris()
    names = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    species = [bundle.target_names[t] for t in bundle.target]
    rows = [
        [f"{v:.1f}" for v in row] + [label]
        for row, label in zip(bundle.data, species)
    ]
    write("iris", names + ["species"], rows)


def make_wine():
    bundle = load_wine()
    cultivars = {"class_0": "barolo", "class_1": "grignolino", "class_2": "barbera"}
    labels = [cultivars[bundle.target_names[t]] for t in bundle.target]
    names = [n.replace("/", "_") for n in bundle.feature_names]
    rows = [
        [repr(float(v)) for v in row] + [label]
        for row, label in zip(bundle.data, labels)
    ]
    write("wine", names + ["cultivar"], rows)


def make_tone():
    rng = np.random.default_rng(TONE_SEED)
    ratios = np.tile(np.linspace(1.5, 3.0, 25), TONE_TRIALS // 25)
    strategy = rng.random(TONE_TRIALS) < 0.5
    noise = rng.normal(0.0, TONE_NOISE_SD, TONE_TRIALS)
    tuned = np.where(strategy, ratios, 2.0) + noise
    rows = [
        [f"{x:.6f}", f"{y:.6f}"]
        for x, y in zip(ratios, tuned)
    ]
    write("tone", ["stretch_ratio", "tuned_ratio"], rows)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    make_iris()
    make_wine()
    make_tone()
