"""Datasets, the two-band toy generator, CSV ingestion, standardization.

Labels are read through Dataset.labels(), which counts every read of a row
that is still in the unlabeled pool — the no-leakage guard. Feature values
are openly readable (pool points' inputs are visible by definition); only
their labels are hidden until acquired.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .rng import RngStream

_SCALE_EPS = 1e-12

DEFAULT_BANDS = ((-1.2, -0.6), (0.6, 1.2))


class SchemaError(Exception):
    """The file does not offer the columns the schema demands."""


class ParseError(Exception):
    """A cell or the file structure could not be parsed."""


class Dataset:
    """Feature matrix, target vector, column schema, and split bookkeeping.

    Splits: test_idx is fixed at construction; the remaining rows form the
    train split, which the harness partitions into visible (labeled) and
    pool (label hidden). labels() on a pool row increments
    pool_label_reads — the counter the leakage tests assert stays zero.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray,
                 column_kinds: tuple[str, ...] | None = None,
                 column_names: tuple[str, ...] | None = None,
                 target_name: str = "y",
                 category_levels: dict[int, list[str]] | None = None,
                 test_idx: np.ndarray | None = None) -> None:
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValueError(f"inconsistent shapes: x {x.shape}, y {y.shape}")
        n, d = x.shape
        self.x = x
        self._y = y
        self.column_kinds = tuple(column_kinds) if column_kinds else ("continuous",) * d
        if len(self.column_kinds) != d:
            raise ValueError("column_kinds length differs from feature count")
        if any(k not in ("continuous", "categorical") for k in self.column_kinds):
            raise ValueError("column kinds must be 'continuous' or 'categorical'")
        self.column_names = tuple(column_names) if column_names else tuple(
            f"x{j}" for j in range(d))
        if len(self.column_names) != d:
            raise ValueError("column_names length differs from feature count")
        self.target_name = target_name
        self.category_levels = dict(category_levels) if category_levels else {}

        test_idx = (np.asarray(test_idx, dtype=np.int64) if test_idx is not None
                    else np.empty(0, dtype=np.int64))
        if test_idx.size and (test_idx.min() < 0 or test_idx.max() >= n):
            raise ValueError("test indices out of range")
        if np.unique(test_idx).size != test_idx.size:
            raise ValueError("duplicate test indices")
        self.test_idx = np.sort(test_idx)
        in_test = np.zeros(n, dtype=bool)
        in_test[self.test_idx] = True
        self.train_idx = np.flatnonzero(~in_test)
        self.visible_idx = np.empty(0, dtype=np.int64)
        self.pool_idx = self.train_idx.copy()
        self._in_pool = ~in_test
        self.pool_label_reads = 0

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_features(self) -> int:
        return self.x.shape[1]

    def column_classes(self) -> dict[int, np.ndarray]:
        """Per categorical column, the sorted code values (for flip noise)."""
        out = {}
        for j, kind in enumerate(self.column_kinds):
            if kind == "categorical":
                levels = self.category_levels.get(j)
                count = len(levels) if levels else int(self.x[:, j].max()) + 1
                out[j] = np.arange(count, dtype=np.float64)
        return out

    def labels(self, indices) -> np.ndarray:
        """Read labels by row index; reads of in-pool rows are counted."""
        idx = np.asarray(indices, dtype=np.int64)
        self.pool_label_reads += int(self._in_pool[idx].sum())
        return self._y[idx].copy()

    def set_visible(self, indices) -> None:
        """Seed the visible set by moving rows out of the pool."""
        self._move_from_pool(indices)

    def acquire(self, indices) -> None:
        """Move acquired rows from pool to visible; labels become free to read."""
        self._move_from_pool(indices)

    def _move_from_pool(self, indices) -> None:
        idx = np.asarray(indices, dtype=np.int64)
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate indices")
        if not np.all(self._in_pool[idx]):
            raise ValueError("indices must currently be in the pool")
        self._in_pool[idx] = False
        self.visible_idx = np.concatenate([self.visible_idx, idx])
        keep = np.ones(self.pool_idx.size, dtype=bool)
        keep[np.searchsorted(self.pool_idx, np.sort(idx))] = False
        self.pool_idx = self.pool_idx[keep]

    def check_splits(self) -> None:
        train = set(self.train_idx.tolist())
        visible = set(self.visible_idx.tolist())
        pool = set(self.pool_idx.tolist())
        test = set(self.test_idx.tolist())
        if visible & pool:
            raise AssertionError("visible and pool overlap")
        if not (visible | pool) <= train:
            raise AssertionError("visible/pool escape the train split")
        if test & train:
            raise AssertionError("test overlaps train")
        if len(visible) + len(pool) != len(train):
            raise AssertionError("split sizes do not add up")

    def copy(self) -> "Dataset":
        """Independent split state over the same underlying arrays."""
        ds = Dataset(self.x, self._y, self.column_kinds, self.column_names,
                     self.target_name, self.category_levels, self.test_idx)
        ds.visible_idx = self.visible_idx.copy()
        ds.pool_idx = self.pool_idx.copy()
        ds._in_pool = self._in_pool.copy()
        return ds


def generate_toy(n_per_band: int, rng: RngStream,
                 bands: tuple[tuple[float, float], ...] = DEFAULT_BANDS,
                 test_interval: tuple[float, float] = (-2.4, 2.4),
                 test_count: int = 200,
                 exclude_bands_from_test: bool = False,
                 slope: float = 0.3, freq: float = 3.0,
                 noise_base: float = 0.05, noise_slope: float = 0.15) -> Dataset:
    """Two-band regression task: y = slope·x + sin(freq·x) + ε(x).

    Train inputs are uniform within the bands; test inputs lie on a dense
    grid spanning past both bands. The noise is heteroskedastic,
    ε(x) ~ N(0, (noise_base + noise_slope·max(x − leftmost band edge, 0))²),
    so variance grows toward higher inputs.
    """
    if n_per_band < 1 or test_count < 1:
        raise ValueError("counts must be >= 1")
    spans = sorted((float(lo), float(hi)) for lo, hi in bands)
    for lo, hi in spans:
        if not lo < hi:
            raise ValueError(f"band ({lo}, {hi}) is empty")
    for (_, hi_a), (lo_b, _) in zip(spans[:-1], spans[1:]):
        if hi_a > lo_b:
            raise ValueError("bands overlap")

    blocks = [lo + rng.uniform(size=n_per_band) * (hi - lo) for lo, hi in spans]
    x_train = np.concatenate(blocks)
    grid = np.linspace(test_interval[0], test_interval[1], test_count)
    if exclude_bands_from_test:
        inside = np.zeros(grid.shape, dtype=bool)
        for lo, hi in spans:
            inside |= (grid > lo) & (grid < hi)
        grid = grid[~inside]
    x_all = np.concatenate([x_train, grid])

    ref = spans[0][0]
    noise_std = noise_base + noise_slope * np.maximum(x_all - ref, 0.0)
    y_all = slope * x_all + np.sin(freq * x_all) + noise_std * rng.normal(size=x_all.shape[0])

    test_idx = np.arange(x_train.shape[0], x_all.shape[0], dtype=np.int64)
    return Dataset(x_all[:, None], y_all, column_kinds=("continuous",),
                   column_names=("x",), target_name="y", test_idx=test_idx)


def load_csv(path: str, target: str, categorical: tuple[str, ...] = ()) -> Dataset:
    """Parse a comma-separated, headered, UTF-8 table into a Dataset.

    The target column must be continuous; columns named in `categorical`
    are mapped to integer codes 0..k-1 over their sorted distinct values,
    with the value dictionary kept on the Dataset. Row order is preserved.
    Cell errors name the 1-based file row (header = row 1) and column.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = list(reader)
    if target not in header:
        raise SchemaError(f"target column {target!r} not in header {header}")
    for name in categorical:
        if name not in header:
            raise SchemaError(f"categorical column {name!r} not in header {header}")
    if target in categorical:
        raise SchemaError("target column cannot be categorical")
    if not rows:
        raise ParseError(f"{path}: no data rows")

    t_col = header.index(target)
    feat_cols = [j for j in range(len(header)) if j != t_col]
    cat_cols = {header.index(name) for name in categorical}

    n, d = len(rows), len(feat_cols)
    x = np.empty((n, d))
    y = np.empty(n)
    raw_cat: dict[int, list[str]] = {j: [] for j in range(d) if feat_cols[j] in cat_cols}
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"row {i + 2}: expected {len(header)} cells, got {len(row)}")
        for out_j, src_j in enumerate(feat_cols):
            if src_j in cat_cols:
                raw_cat[out_j].append(row[src_j])
            else:
                try:
                    x[i, out_j] = float(row[src_j])
                except ValueError:
                    raise ParseError(
                        f"row {i + 2}, column {header[src_j]!r}: "
                        f"cannot parse {row[src_j]!r} as a number") from None
        try:
            y[i] = float(row[t_col])
        except ValueError:
            raise ParseError(f"row {i + 2}, column {target!r}: "
                             f"cannot parse {row[t_col]!r} as a number") from None

    category_levels: dict[int, list[str]] = {}
    for j, values in raw_cat.items():
        levels = sorted(set(values))
        lookup = {v: c for c, v in enumerate(levels)}
        x[:, j] = [lookup[v] for v in values]
        category_levels[j] = levels

    kinds = tuple("categorical" if feat_cols[j] in cat_cols else "continuous"
                  for j in range(d))
    names = tuple(header[j] for j in feat_cols)
    return Dataset(x, y, column_kinds=kinds, column_names=names,
                   target_name=target, category_levels=category_levels)


def save_csv(ds: Dataset, path: str, include_split: bool = False) -> None:
    """Write features + target (+ optional split column) back to CSV.

    Categorical codes are written as their original level strings; floats
    use repr so a reload round-trips exactly.
    """
    in_test = np.zeros(ds.n_rows, dtype=bool)
    in_test[ds.test_idx] = True
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = list(ds.column_names) + [ds.target_name]
        if include_split:
            header.append("split")
        writer.writerow(header)
        y = ds._y
        for i in range(ds.n_rows):
            row = []
            for j in range(ds.n_features):
                if ds.column_kinds[j] == "categorical" and j in ds.category_levels:
                    row.append(ds.category_levels[j][int(ds.x[i, j])])
                else:
                    row.append(repr(float(ds.x[i, j])))
            row.append(repr(float(y[i])))
            if include_split:
                row.append("test" if in_test[i] else "train")
            writer.writerow(row)


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine maps to zero mean, unit variance, and back.

    Categorical feature columns carry identity maps. Scales are clamped to
    a tiny epsilon, so constant columns standardize to all zeros.
    """

    feat_mean: np.ndarray
    feat_scale: np.ndarray
    y_mean: float
    y_scale: float

    def transform_features(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.feat_mean) / self.feat_scale

    def inverse_features(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=np.float64) * self.feat_scale + self.feat_mean

    def transform_target(self, y):
        return (np.asarray(y, dtype=np.float64) - self.y_mean) / self.y_scale

    def inverse_target(self, y):
        return np.asarray(y, dtype=np.float64) * self.y_scale + self.y_mean

    def inverse_target_variance(self, var):
        return np.asarray(var, dtype=np.float64) * self.y_scale**2

    def to_json(self) -> dict:
        return {"feat_mean": self.feat_mean.tolist(),
                "feat_scale": self.feat_scale.tolist(),
                "y_mean": self.y_mean, "y_scale": self.y_scale}

    @staticmethod
    def from_json(obj: dict) -> "Standardizer":
        return Standardizer(np.asarray(obj["feat_mean"], dtype=np.float64),
                            np.asarray(obj["feat_scale"], dtype=np.float64),
                            float(obj["y_mean"]), float(obj["y_scale"]))


def standardize(ds: Dataset, fit_on: np.ndarray,
                target_fit_on: np.ndarray | None = None) -> tuple[Dataset, Standardizer]:
    """Standardize continuous columns; returns a new Dataset plus the maps.

    Feature statistics come from fit_on rows; target statistics from
    target_fit_on (default: fit_on). Target stats are read through the
    label guard, so fitting on hidden pool labels would be counted.
    """
    fit_on = np.asarray(fit_on, dtype=np.int64)
    if fit_on.size == 0:
        raise ValueError("fit_on must be nonempty")
    target_fit_on = fit_on if target_fit_on is None else np.asarray(target_fit_on,
                                                                    dtype=np.int64)
    if target_fit_on.size == 0:
        raise ValueError("target_fit_on must be nonempty")

    cont = np.array([k == "continuous" for k in ds.column_kinds])
    feat_mean = np.zeros(ds.n_features)
    feat_scale = np.ones(ds.n_features)
    sub = ds.x[fit_on]
    feat_mean[cont] = sub[:, cont].mean(axis=0)
    feat_scale[cont] = np.maximum(sub[:, cont].std(axis=0), _SCALE_EPS)

    y_fit = ds.labels(target_fit_on)
    std = Standardizer(feat_mean=feat_mean, feat_scale=feat_scale,
                       y_mean=float(y_fit.mean()),
                       y_scale=float(max(y_fit.std(), _SCALE_EPS)))

    out = Dataset(std.transform_features(ds.x), std.transform_target(ds._y),
                  ds.column_kinds, ds.column_names, ds.target_name,
                  ds.category_levels, ds.test_idx)
    out.visible_idx = ds.visible_idx.copy()
    out.pool_idx = ds.pool_idx.copy()
    out._in_pool = ds._in_pool.copy()
    return out, std


def with_test_split(ds: Dataset, test_idx) -> Dataset:
    """Same data, fresh split bookkeeping with the given test rows."""
    return Dataset(ds.x, ds._y, ds.column_kinds, ds.column_names,
                   ds.target_name, ds.category_levels, test_idx)


def apply_standardizer(ds: Dataset, std: "Standardizer") -> Dataset:
    """Transform a dataset with an already-fitted Standardizer."""
    out = Dataset(std.transform_features(ds.x), std.transform_target(ds._y),
                  ds.column_kinds, ds.column_names, ds.target_name,
                  ds.category_levels, ds.test_idx)
    out.visible_idx = ds.visible_idx.copy()
    out.pool_idx = ds.pool_idx.copy()
    out._in_pool = ds._in_pool.copy()
    return out


def random_split(n_rows: int, test_fraction: float, rng: RngStream
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint (train_idx, test_idx) with round(n·fraction) test rows."""
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must lie in [0, 1)")
    perm = rng.permutation(n_rows)
    n_test = int(round(n_rows * test_fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def splits_to_json(ds: Dataset, provenance: dict | None = None) -> dict:
    return {
        "test": ds.test_idx.tolist(),
        "visible": ds.visible_idx.tolist(),
        "pool": ds.pool_idx.tolist(),
        "provenance": provenance or {},
    }


def apply_splits(ds: Dataset, obj: dict) -> None:
    """Restore split bookkeeping saved by splits_to_json."""
    test = np.asarray(obj["test"], dtype=np.int64)
    if not np.array_equal(np.sort(test), ds.test_idx):
        raise ValueError("saved test split does not match this dataset")
    ds.visible_idx = np.asarray(obj["visible"], dtype=np.int64)
    ds.pool_idx = np.asarray(obj["pool"], dtype=np.int64)
    ds._in_pool = np.zeros(ds.n_rows, dtype=bool)
    ds._in_pool[ds.pool_idx] = True
    ds.check_splits()


def save_splits(ds: Dataset, path: str, provenance: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(splits_to_json(ds, provenance), fh)


def load_splits(ds: Dataset, path: str) -> None:
    with open(path, "r", encoding="utf-8") as fh:
        apply_splits(ds, json.load(fh))
