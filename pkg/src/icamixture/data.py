"""Dataset ingestion, preprocessing, and synthetic mixture generation.

CSV files are comma-separated UTF-8 with a required header row and ``.``
as the decimal point. A designated label column may hold arbitrary
strings; labels are mapped to integer codes 0..K-1 in order of first
appearance. Three small classical fixtures ship with the package (see
:func:`fixture_path`).
"""

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import linalg
from .exceptions import DataError, InvalidInputError

FIXTURES = ("iris", "wine", "tone")


@dataclass(frozen=True)
class Dataset:
    """A feature matrix with optional integer class labels."""

    x: np.ndarray
    labels: np.ndarray = None
    names: tuple = ()
    label_name: str = None
    label_values: tuple = ()

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def r(self):
        return self.x.shape[1]


def fixture_path(name):
    """Filesystem path of a bundled dataset (iris, wine, or tone)."""
    if name not in FIXTURES:
        raise InvalidInputError(f"unknown fixture {name!r}; have {FIXTURES}")
    return Path(resources.files("icamixture") / "datasets" / f"{name}.csv")


def load_csv(path, label_column=None):
    """Parse a rectangular numeric CSV into a :class:`Dataset`.

    Raises :class:`DataError` carrying the 1-based row/column location for
    ragged rows, non-numeric feature cells, or an empty file.
    """
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            rows = list(csv.reader(handle))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    rows = [row for row in rows if row]
    if not rows:
        raise DataError(f"{path} is empty")
    header = [name.strip() for name in rows[0]]
    label_idx = None
    if label_column is not None:
        if label_column not in header:
            raise DataError(
                f"label column {label_column!r} not in header {header}"
            )
        label_idx = header.index(label_column)
    feature_names = tuple(n for i, n in enumerate(header) if i != label_idx)

    values = np.empty((len(rows) - 1, len(feature_names)))
    raw_labels = []
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(
                f"row {i} has {len(row)} cells, expected {len(header)}",
                row=i,
            )
        col_out = 0
        for j, cell in enumerate(row):
            if j == label_idx:
                raw_labels.append(cell.strip())
                continue
            try:
                values[i - 2, col_out] = float(cell)
            except ValueError:
                raise DataError(
                    f"row {i}, column {j + 1} ({header[j]!r}): "
                    f"non-numeric value {cell.strip()!r}",
                    row=i,
                    column=j + 1,
                ) from None
            col_out += 1

    labels = None
    label_values = ()
    if label_idx is not None:
        seen = {}
        codes = []
        for value in raw_labels:
            if value not in seen:
                seen[value] = len(seen)
            codes.append(seen[value])
        labels = np.asarray(codes, dtype=int)
        label_values = tuple(seen)
    return Dataset(x=values, labels=labels, names=feature_names,
                   label_name=label_column, label_values=label_values)


def write_csv(dataset, path):
    """Write a dataset back to CSV; floats use shortest round-trip form."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        header = list(dataset.names)
        if dataset.labels is not None:
            header.append(dataset.label_name or "label")
        writer.writerow(header)
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.x[i]]
            if dataset.labels is not None:
                code = int(dataset.labels[i])
                row.append(
                    dataset.label_values[code] if dataset.label_values else str(code)
                )
            writer.writerow(row)


def standardize(x):
    """Center columns and scale to unit population standard deviation.

    Returns ``(x_std, means, sds)``. Uses the population (divide by n)
    convention; a constant column is an error naming the column.
    """
    x = np.asarray(x, dtype=float)
    means = x.mean(axis=0)
    sds = x.std(axis=0)
    flat = np.nonzero(sds <= 0.0)[0]
    if flat.size:
        raise DataError(f"column {flat[0] + 1} is constant; cannot standardize",
                        column=int(flat[0] + 1))
    return (x - means) / sds, means, sds


def pca_project(x, d, use_correlation=False):
    """Project centered data onto the top-d principal axes.

    Returns ``(scores, loadings, explained_variance)`` with the variance
    vector in descending order. ``use_correlation`` standardizes columns
    first (correlation-matrix PCA); the default works on the covariance of
    the raw centered data.
    """
    x = np.asarray(x, dtype=float)
    n, r = x.shape
    if not 1 <= d <= r:
        raise InvalidInputError(f"need 1 <= d <= {r}, got d={d}")
    work = standardize(x)[0] if use_correlation else x - x.mean(axis=0)
    cov = work.T @ work / (n - 1)
    eig = linalg.sym_eig(cov)
    rank = int(np.sum(eig.eigenvalues > 1e-12 * max(eig.eigenvalues[0], 0.0)))
    if d > rank:
        raise InvalidInputError(
            f"requested {d} scores but the data has numerical rank {rank}"
        )
    loadings = eig.eigenvectors[:, :d]
    # Sign convention: largest-magnitude entry of each axis is positive.
    anchor = np.abs(loadings).argmax(axis=0)
    signs = np.sign(loadings[anchor, np.arange(d)])
    signs[signs == 0] = 1.0
    loadings = loadings * signs
    return work @ loadings, loadings, eig.eigenvalues[:d]


# Per-coordinate source samplers, each standardized to unit variance.
_BIMODAL_MU = 0.9
_BIMODAL_SD = np.sqrt(1.0 - _BIMODAL_MU ** 2)


def _draw_sources(kind, n, rng):
    if kind == "uniform":
        return rng.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=n)
    if kind == "laplace":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0), size=n)
    if kind == "bimodal-gauss":
        signs = rng.choice((-1.0, 1.0), size=n)
        return signs * _BIMODAL_MU + rng.normal(0.0, _BIMODAL_SD, size=n)
    raise InvalidInputError(
        f"unknown source kind {kind!r}; expected uniform, laplace, or bimodal-gauss"
    )


@dataclass(frozen=True)
class SynthSpec:
    """Generator description for a synthetic ICA mixture sample.

    ``source_kinds[j][k]`` names the distribution of coordinate k in
    component j; all named sources are standardized analytically so the
    latent coordinates have unit variance by construction. ``mixing[j]``
    is the invertible matrix applied to component j's latent vector, and
    ``shifts[j]`` is added afterwards.
    """

    m: int
    r: int
    n: int
    lambdas: tuple
    source_kinds: tuple
    mixing: tuple
    shifts: tuple
    seed: int = 0

    def __post_init__(self):
        if abs(sum(self.lambdas) - 1.0) > 1e-9:
            raise InvalidInputError("mixing weights must sum to 1")
        if len(self.lambdas) != self.m or len(self.source_kinds) != self.m:
            raise InvalidInputError("per-component fields must have length m")
        if len(self.mixing) != self.m or len(self.shifts) != self.m:
            raise InvalidInputError("per-component fields must have length m")


def synth(spec):
    """Draw a labeled sample from a synthetic ICA mixture, reproducibly."""
    rng = np.random.default_rng(spec.seed)
    labels = rng.choice(spec.m, size=spec.n, p=np.asarray(spec.lambdas))
    x = np.empty((spec.n, spec.r))
    for j in range(spec.m):
        rows = np.nonzero(labels == j)[0]
        sources = np.column_stack([
            _draw_sources(spec.source_kinds[j][k], rows.size, rng)
            for k in range(spec.r)
        ]) if rows.size else np.empty((0, spec.r))
        a = np.asarray(spec.mixing[j], dtype=float)
        x[rows] = sources @ a.T + np.asarray(spec.shifts[j], dtype=float)
    names = tuple(f"x{k + 1}" for k in range(spec.r))
    return Dataset(x=x, labels=labels, names=names, label_name="label")


def random_mixing_matrix(r, rng, max_condition=4.0):
    """A random invertible matrix with a bounded condition number."""
    while True:
        a = rng.normal(size=(r, r))
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] > 0 and sv[0] / sv[-1] <= max_condition:
            return a
