"""Toy generator, CSV ingestion, standardization, and split bookkeeping."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ncprior import (
    Dataset,
    ParseError,
    SchemaError,
    Standardizer,
    apply_splits,
    apply_standardizer,
    generate_toy,
    load_csv,
    load_splits,
    make_rng,
    random_split,
    save_csv,
    save_splits,
    splits_to_json,
    standardize,
    with_test_split,
)

BANDS = ((-1.2, -0.6), (0.6, 1.2))


def _in_bands(x):
    return ((x >= -1.2) & (x <= -0.6)) | ((x >= 0.6) & (x <= 1.2))


# ------------------------------------------------------------------- toy

def test_toy_train_points_lie_in_bands():
    ds = generate_toy(50, make_rng(0, 0))
    x = ds.x[ds.train_idx, 0]
    assert x.shape == (100,)
    assert np.all(_in_bands(x))
    # 50 in each band, lower band drawn first
    assert np.all(x[:50] <= -0.6) and np.all(x[50:] >= 0.6)


def test_toy_test_grid_is_exact_linspace():
    ds = generate_toy(10, make_rng(1, 0))
    np.testing.assert_array_equal(ds.x[ds.test_idx, 0], np.linspace(-2.4, 2.4, 200))
    assert ds.test_idx.shape == (200,)


def test_toy_exclude_bands_flag():
    ds = generate_toy(10, make_rng(2, 0), exclude_bands_from_test=True)
    grid = ds.x[ds.test_idx, 0]
    assert grid.size < 200
    assert not np.any((np.abs(grid) > 0.6) & (np.abs(grid) < 1.2))
    # band endpoints on the closure may remain; interiors must be gone
    full = np.linspace(-2.4, 2.4, 200)
    interior = (np.abs(full) > 0.6) & (np.abs(full) < 1.2)
    assert grid.size == 200 - int(interior.sum())


def test_toy_noise_grows_with_x():
    # [DERIVED] residuals about the noiseless curve: pooled std in the right
    # band must sit in [0.32, 0.41] (the band's noise range) and dwarf the
    # left band's, which stays under 0.15
    ds = generate_toy(4000, make_rng(3, 0))
    x = ds.x[ds.train_idx, 0]
    y = ds.labels(ds.train_idx)
    resid = y - (0.3 * x + np.sin(3.0 * x))
    left = resid[x < 0]
    right = resid[x > 0]
    assert left.std() < 0.15
    assert 0.30 < right.std() < 0.43
    assert right.std() > 2.0 * left.std()


def test_toy_targets_are_noisy_everywhere():
    ds = generate_toy(5, make_rng(4, 0))
    x = ds.x[ds.test_idx, 0]
    y = ds.labels(ds.test_idx)
    assert np.all(y != 0.3 * x + np.sin(3.0 * x))


def test_toy_determinism():
    a = generate_toy(20, make_rng(7, 0))
    b = generate_toy(20, make_rng(7, 0))
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.labels(a.test_idx), b.labels(b.test_idx))


def test_toy_validation():
    with pytest.raises(ValueError):
        generate_toy(0, make_rng(0, 0))
    with pytest.raises(ValueError):
        generate_toy(5, make_rng(0, 0), bands=((-1.0, 0.5), (0.0, 1.0)))
    with pytest.raises(ValueError):
        generate_toy(5, make_rng(0, 0), bands=((0.5, 0.5),))


# ------------------------------------------------------------ bookkeeping

def test_split_lifecycle_and_label_guard():
    ds = generate_toy(10, make_rng(8, 0))
    assert ds.pool_label_reads == 0
    ds.set_visible(ds.train_idx[:4])
    ds.labels(ds.visible_idx)              # visible reads are free
    ds.labels(ds.test_idx[:5])             # test reads are free
    assert ds.pool_label_reads == 0
    ds.labels(ds.pool_idx[:3])             # three hidden labels peeked
    assert ds.pool_label_reads == 3
    grab = ds.pool_idx[:2]
    ds.acquire(grab)
    ds.labels(grab)                        # acquired -> free now
    assert ds.pool_label_reads == 3
    ds.check_splits()
    assert ds.visible_idx.size == 6 and ds.pool_idx.size == 14


def test_acquire_rejects_non_pool_rows():
    ds = generate_toy(5, make_rng(9, 0))
    ds.set_visible(ds.train_idx[:2])
    with pytest.raises(ValueError):
        ds.acquire(ds.visible_idx[:1])     # already visible
    with pytest.raises(ValueError):
        ds.acquire(ds.test_idx[:1])        # test rows are never acquirable
    with pytest.raises(ValueError):
        ds.acquire(np.array([ds.pool_idx[0], ds.pool_idx[0]]))


def test_copy_isolates_split_state():
    ds = generate_toy(5, make_rng(10, 0))
    ds.set_visible(ds.train_idx[:2])
    clone = ds.copy()
    clone.acquire(clone.pool_idx[:3])
    assert ds.pool_idx.size == 8 and clone.pool_idx.size == 5
    clone.labels(clone.pool_idx[:1])
    assert ds.pool_label_reads == 0


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(3), test_idx=np.array([3]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(3), test_idx=np.array([1, 1]))
    with pytest.raises(ValueError):
        Dataset(np.zeros((3, 2)), np.zeros(3), column_kinds=("continuous",))


def test_with_test_split():
    ds = generate_toy(5, make_rng(11, 0))
    ds2 = with_test_split(ds, np.array([0, 1]))
    assert ds2.test_idx.tolist() == [0, 1]
    assert ds2.train_idx.size == ds.n_rows - 2
    assert ds2.pool_label_reads == 0


@given(st.integers(1, 200), st.floats(0.0, 0.9), st.integers(0, 2**31))
@settings(max_examples=50, deadline=None)
def test_random_split_partitions(n, frac, seed):
    train, test = random_split(n, frac, make_rng(seed, 7))
    assert test.size == int(round(n * frac))
    assert np.intersect1d(train, test).size == 0
    np.testing.assert_array_equal(np.sort(np.concatenate([train, test])), np.arange(n))


def test_random_split_deterministic():
    a = random_split(100, 0.25, make_rng(5, 7))
    b = random_split(100, 0.25, make_rng(5, 7))
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    with pytest.raises(ValueError):
        random_split(10, 1.0, make_rng(0, 7))


def test_splits_json_round_trip(tmp_path):
    ds = generate_toy(6, make_rng(12, 0))
    ds.set_visible(ds.train_idx[:3])
    ds.acquire(ds.pool_idx[:2])
    path = str(tmp_path / "splits.json")
    save_splits(ds, path, provenance={"round": 2})
    fresh = generate_toy(6, make_rng(12, 0))
    load_splits(fresh, path)
    np.testing.assert_array_equal(fresh.visible_idx, ds.visible_idx)
    np.testing.assert_array_equal(fresh.pool_idx, ds.pool_idx)
    fresh.check_splits()

    other = generate_toy(6, make_rng(12, 0), test_count=150)
    with pytest.raises(ValueError):
        apply_splits(other, splits_to_json(ds))


# ------------------------------------------------------------------- csv

def _write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def test_csv_round_trip(tmp_path):
    rng = make_rng(13, 0)
    x = rng.normal((12, 2))
    codes = rng.integers(0, 3, 12).astype(np.float64)
    ds = Dataset(np.column_stack([x[:, 0], codes, x[:, 1]]), rng.normal(12),
                 column_kinds=("continuous", "categorical", "continuous"),
                 column_names=("a", "color", "b"), target_name="delay",
                 category_levels={1: ["blue", "green", "red"]})
    path = str(tmp_path / "rt.csv")
    save_csv(ds, path)
    back = load_csv(path, target="delay", categorical=("color",))
    np.testing.assert_array_equal(back.x, ds.x)
    np.testing.assert_array_equal(back.labels(back.train_idx), ds._y)
    assert back.column_kinds == ds.column_kinds
    assert back.column_names == ds.column_names
    assert back.category_levels == {1: ["blue", "green", "red"]}


def test_csv_eight_feature_table(tmp_path):
    # the tabular path must carry an 8-feature schema
    rng = make_rng(14, 0)
    header = ",".join([f"f{j}" for j in range(8)] + ["y"])
    lines = [header]
    for i in range(50):
        vals = rng.normal(9)
        lines.append(",".join(repr(float(v)) for v in vals))
    ds = load_csv(_write(tmp_path, "\n".join(lines) + "\n"), target="y")
    assert ds.n_features == 8 and ds.n_rows == 50
    assert all(k == "continuous" for k in ds.column_kinds)


def test_csv_categorical_codes_are_sorted_levels(tmp_path):
    path = _write(tmp_path, "city,y\nosaka,1.0\nkyoto,2.0\nosaka,3.0\nnara,4.0\n")
    ds = load_csv(path, target="y", categorical=("city",))
    assert ds.category_levels[0] == ["kyoto", "nara", "osaka"]
    np.testing.assert_array_equal(ds.x[:, 0], [2.0, 0.0, 2.0, 1.0])


def test_csv_parse_error_names_row_and_column(tmp_path):
    path = _write(tmp_path, "a,y\n1.0,2.0\noops,3.0\n")
    with pytest.raises(ParseError, match=r"row 3.*'a'"):
        load_csv(path, target="y")
    path = _write(tmp_path, "a,y\nbad,2.0\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path, target="y")
    path = _write(tmp_path, "a,y\n1.0,2.0,3.0\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path, target="y")


def test_csv_schema_errors(tmp_path):
    path = _write(tmp_path, "a,b\n1.0,2.0\n")
    with pytest.raises(SchemaError):
        load_csv(path, target="y")
    with pytest.raises(SchemaError):
        load_csv(path, target="a", categorical=("zzz",))
    with pytest.raises(SchemaError):
        load_csv(path, target="a", categorical=("a",))


def test_csv_empty_and_headerless(tmp_path):
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, ""), target="y")
    with pytest.raises(ParseError):
        load_csv(_write(tmp_path, "a,y\n"), target="y")


def test_csv_split_column(tmp_path):
    ds = generate_toy(3, make_rng(15, 0), test_count=4)
    path = str(tmp_path / "s.csv")
    save_csv(ds, path, include_split=True)
    lines = (tmp_path / "s.csv").read_text().strip().split("\n")
    assert lines[0] == "x,y,split"
    tags = [ln.rsplit(",", 1)[1] for ln in lines[1:]]
    assert tags == ["train"] * 6 + ["test"] * 4


# ------------------------------------------------------------ standardize

def test_standardize_fit_statistics():
    ds = generate_toy(30, make_rng(16, 0))
    ds.set_visible(ds.train_idx[:10])
    out, std = standardize(ds, ds.train_idx, target_fit_on=ds.visible_idx)
    fit = out.x[ds.train_idx, 0]
    assert abs(fit.mean()) < 1e-12
    assert abs(fit.std() - 1.0) < 1e-12
    yv = out.labels(out.visible_idx)
    assert abs(yv.mean()) < 1e-12
    assert abs(yv.std() - 1.0) < 1e-12
    # fitting the target on visible labels must not touch the pool guard
    assert ds.pool_label_reads == 0 and out.pool_label_reads == 0


def test_standardize_counts_pool_label_reads():
    ds = generate_toy(10, make_rng(17, 0))
    ds.set_visible(ds.train_idx[:5])
    standardize(ds, ds.train_idx, target_fit_on=ds.pool_idx[:4])
    assert ds.pool_label_reads == 4


def test_standardizer_inverse_round_trip():
    ds = generate_toy(20, make_rng(18, 0))
    _, std = standardize(ds, ds.train_idx)
    x = ds.x[ds.test_idx]
    np.testing.assert_allclose(std.inverse_features(std.transform_features(x)), x,
                               rtol=0, atol=1e-12)
    y = ds.labels(ds.test_idx)
    np.testing.assert_allclose(std.inverse_target(std.transform_target(y)), y,
                               rtol=0, atol=1e-12)
    assert abs(std.inverse_target_variance(2.0) - 2.0 * std.y_scale**2) < 1e-15


def test_standardize_skips_categorical_columns():
    x = np.column_stack([np.arange(6.0), np.array([0, 1, 2, 0, 1, 2], dtype=float)])
    ds = Dataset(x, np.arange(6.0), column_kinds=("continuous", "categorical"))
    out, std = standardize(ds, np.arange(6))
    np.testing.assert_array_equal(out.x[:, 1], x[:, 1])
    assert std.feat_mean[1] == 0.0 and std.feat_scale[1] == 1.0


def test_standardize_constant_column():
    x = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
    ds = Dataset(x, np.arange(5.0))
    out, _ = standardize(ds, np.arange(5))
    np.testing.assert_array_equal(out.x[:, 0], np.zeros(5))
    assert np.all(np.isfinite(out.x))


def test_apply_standardizer_reuses_maps():
    ds = generate_toy(15, make_rng(19, 0))
    out, std = standardize(ds, ds.train_idx)
    again = apply_standardizer(ds, std)
    np.testing.assert_array_equal(again.x, out.x)
    np.testing.assert_array_equal(again.labels(again.test_idx),
                                  out.labels(out.test_idx))


def test_standardizer_json_round_trip():
    ds = generate_toy(10, make_rng(20, 0))
    _, std = standardize(ds, ds.train_idx)
    back = Standardizer.from_json(std.to_json())
    np.testing.assert_array_equal(back.feat_mean, std.feat_mean)
    np.testing.assert_array_equal(back.feat_scale, std.feat_scale)
    assert back.y_mean == std.y_mean and back.y_scale == std.y_scale


def test_standardize_validation():
    ds = generate_toy(5, make_rng(21, 0))
    with pytest.raises(ValueError):
        standardize(ds, np.empty(0, dtype=np.int64))
    with pytest.raises(ValueError):
        standardize(ds, ds.train_idx, target_fit_on=np.empty(0, dtype=np.int64))
