"""Missingness induction under MCAR/MAR/MNAR and the recovery combination."""

import numpy as np
import pytest

from misslab.data import from_matrix, load_matrix_csv, mask_of
from misslab.missingness import (
    MissingnessSpec,
    combine_recovered,
    induce_missingness,
    induce_on_dataset,
    missingness_summary,
    save_induced,
)

NAN = np.nan


def uniform_matrix(seed, shape=(500, 8)):
    return np.random.default_rng(seed).random(shape)


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------

def test_spec_rejects_degree_outside_unit_interval():
    with pytest.raises(ValueError, match="degree"):
        MissingnessSpec("MCAR", degree=1.2)
    with pytest.raises(ValueError, match="degree"):
        MissingnessSpec("MCAR", degree=-0.1)


def test_spec_rejects_unknown_scheme_and_empty_mar_drivers():
    with pytest.raises(ValueError, match="unknown scheme"):
        MissingnessSpec("BLOCK", degree=0.1)
    with pytest.raises(ValueError, match="driver"):
        MissingnessSpec("MAR", degree=0.1)


def test_spec_normalizes_scheme_case():
    assert MissingnessSpec("mcar", degree=0.1).scheme == "MCAR"


# ---------------------------------------------------------------------------
# Induction
# ---------------------------------------------------------------------------

def test_degree_zero_masks_nothing():
    x = uniform_matrix(0)
    out = induce_missingness(x, MissingnessSpec("MCAR", 0.0), seed=1)
    assert out.mask.sum() == 0
    assert np.array_equal(out.holed, x)


def test_degree_one_mcar_masks_everything():
    x = uniform_matrix(1, (20, 4))
    out = induce_missingness(x, MissingnessSpec("MCAR", 1.0), seed=1)
    assert out.mask.all()
    assert np.isnan(out.holed).all()


def test_mcar_realized_fraction_concentrates():
    x = np.random.default_rng(2).random((20_000, 56))
    out = induce_missingness(x, MissingnessSpec("MCAR", 0.10), seed=3)
    assert 0.095 <= out.realized_fraction <= 0.105


def test_mask_exactness_invariant():
    x = uniform_matrix(4)
    out = induce_missingness(x, MissingnessSpec("MCAR", 0.3), seed=5)
    hidden = out.mask.astype(bool)
    assert np.isnan(out.holed[hidden]).all()
    assert np.array_equal(out.holed[~hidden], x[~hidden])


def test_same_seed_identical_mask_different_seed_differs():
    x = uniform_matrix(6)
    spec = MissingnessSpec("MCAR", 0.25)
    a = induce_missingness(x, spec, seed=7)
    b = induce_missingness(x, spec, seed=7)
    c = induce_missingness(x, spec, seed=8)
    assert np.array_equal(a.mask, b.mask)
    assert not np.array_equal(a.mask, c.mask)


def test_schemes_draw_distinct_streams():
    x = uniform_matrix(9)
    mcar = induce_missingness(x, MissingnessSpec("MCAR", 0.3), seed=1)
    mnar = induce_missingness(x, MissingnessSpec("MNAR", 0.3), seed=1)
    assert not np.array_equal(mcar.mask, mnar.mask)


def test_rejects_input_with_missing_cells():
    x = uniform_matrix(10).copy()
    x[0, 0] = NAN
    with pytest.raises(ValueError, match="already has missing"):
        induce_missingness(x, MissingnessSpec("MCAR", 0.1), seed=0)


def test_mar_never_masks_driver_columns():
    x = uniform_matrix(11, (2000, 6))
    spec = MissingnessSpec("MAR", 0.3, mar_drivers=(0, 2))
    out = induce_missingness(x, spec, seed=12)
    assert out.mask[:, [0, 2]].sum() == 0
    assert out.mask[:, [1, 3, 4, 5]].sum() > 0


def test_mar_masking_follows_driver_values():
    # Rows with larger driver values must be masked more often.
    x = uniform_matrix(13, (5000, 4))
    spec = MissingnessSpec("MAR", 0.3, mar_drivers=(0,))
    out = induce_missingness(x, spec, seed=14)
    rate = out.mask[:, 1:].mean(axis=1)
    high = x[:, 0] > np.median(x[:, 0])
    assert rate[high].mean() > rate[~high].mean() + 0.05


def test_mar_driver_bounds_and_all_driver_errors():
    x = uniform_matrix(15, (50, 3))
    with pytest.raises(ValueError, match="out of range"):
        induce_missingness(x, MissingnessSpec("MAR", 0.2, mar_drivers=(7,)), seed=0)
    with pytest.raises(ValueError, match="non-driver"):
        induce_missingness(x, MissingnessSpec("MAR", 0.2, mar_drivers=(0, 1, 2)), seed=0)


def test_mnar_masks_high_values_preferentially():
    x = uniform_matrix(16, (5000, 3))
    out = induce_missingness(x, MissingnessSpec("MNAR", 0.3), seed=17)
    hidden = out.mask.astype(bool)
    assert x[hidden].mean() > x[~hidden].mean()


def test_calibrated_schemes_hit_requested_degree():
    x = uniform_matrix(18, (4000, 10))
    for scheme, drivers in (("MAR", (0,)), ("MNAR", ())):
        spec = MissingnessSpec(scheme, 0.3, mar_drivers=drivers)
        out = induce_missingness(x, spec, seed=19)
        eligible = out.mask.shape[1] - len(drivers)
        realized = out.mask.sum() / (out.mask.shape[0] * eligible)
        assert abs(realized - 0.3) < 0.02, scheme


def test_induce_on_dataset_protects_separate_target():
    feats = uniform_matrix(20, (100, 4))
    target = (feats[:, 0] > 0.5).astype(float)
    ds = from_matrix(feats, target=target)
    out = induce_on_dataset(ds, MissingnessSpec("MCAR", 0.4), seed=21)
    assert out.mask.shape == feats.shape
    with pytest.raises(ValueError, match="protect"):
        induce_on_dataset(ds, MissingnessSpec("MCAR", 0.4, protect_target=False), seed=21)


# ---------------------------------------------------------------------------
# Recovery combination
# ---------------------------------------------------------------------------

def test_combine_zero_mask_returns_holed_exactly():
    x = uniform_matrix(22, (10, 3))
    filler = np.zeros_like(x)
    out = combine_recovered(x, filler, np.zeros_like(x, dtype=np.uint8))
    assert np.array_equal(out, x)


def test_combine_full_mask_returns_model_output_exactly():
    x = uniform_matrix(23, (10, 3))
    holed = np.full_like(x, NAN)
    out = combine_recovered(holed, x, np.ones_like(x, dtype=np.uint8))
    assert np.array_equal(out, x)


def test_combine_single_masked_cell():
    holed = np.array([[1.0, NAN], [2.0, 3.0]])
    model_output = np.array([[9.0, 8.0], [7.0, 6.0]])
    mask = np.array([[0, 1], [0, 0]])
    out = combine_recovered(holed, model_output, mask)
    assert out.tolist() == [[1.0, 8.0], [2.0, 3.0]]


def test_combine_output_is_fully_observed():
    x = uniform_matrix(24, (50, 5))
    induced = induce_missingness(x, MissingnessSpec("MCAR", 0.5), seed=25)
    out = combine_recovered(induced.holed, np.zeros_like(x), induced.mask)
    assert not np.isnan(out).any()


def test_combine_rejects_shape_and_mask_disagreement():
    holed = np.array([[1.0, NAN]])
    good = np.array([[0.0, 0.0]])
    with pytest.raises(ValueError, match="shapes differ"):
        combine_recovered(holed, np.zeros((2, 2)), np.zeros((1, 2)))
    with pytest.raises(ValueError, match="disagree"):
        combine_recovered(holed, good, np.zeros((1, 2)))
    with pytest.raises(ValueError, match="fully observed"):
        combine_recovered(holed, np.array([[NAN, 0.0]]), np.array([[0, 1]]))


# ---------------------------------------------------------------------------
# Summary and persistence
# ---------------------------------------------------------------------------

def test_summary_238_of_1000_cells():
    rng = np.random.default_rng(26)
    x = rng.random((100, 10))
    flat = np.zeros(1000, dtype=bool)
    flat[rng.choice(1000, size=238, replace=False)] = True
    holed = x.copy()
    holed.ravel()[flat] = NAN
    summary = missingness_summary(from_matrix(holed))
    assert summary["overall"] == 0.238


def test_summary_fully_observed_is_zero():
    summary = missingness_summary(from_matrix(np.ones((4, 3))))
    assert summary["overall"] == 0.0
    assert (summary["per_column"] == 0.0).all()


def test_summary_one_fully_masked_column():
    x = np.ones((5, 4))
    x[:, 2] = NAN
    summary = missingness_summary(x)
    assert summary["per_column"][2] == 1.0
    assert summary["overall"] == 0.25


def test_save_induced_round_trip(tmp_path):
    x = uniform_matrix(27, (30, 4))
    induced = induce_missingness(x, MissingnessSpec("MCAR", 0.3), seed=28)
    holed_path, mask_path = save_induced(str(tmp_path / "exp"), induced)
    assert holed_path.endswith(".holed.csv") and mask_path.endswith(".mask.csv")
    holed = load_matrix_csv(holed_path)
    mask = load_matrix_csv(mask_path).astype(np.uint8)
    assert np.array_equal(mask_of(holed), induced.mask)
    assert np.array_equal(mask, induced.mask)
