import json
import math

import numpy as np
import pytest

from mixradon import profiles as pr


def test_closed_form_evaluates_pointwise():
    g = pr.gaussian()
    assert g(0.0) == 1.0
    np.testing.assert_allclose(g(np.array([1.0, 2.0])), np.exp([-1.0, -4.0]))


def test_zero_profile_is_flagged_and_vanishes():
    z = pr.zero()
    assert z.is_zero
    assert np.all(z(np.linspace(0.1, 5, 7)) == 0)


@pytest.mark.parametrize("grid", [[1.0, 0.5, 2.0], [0.0, 1.0, 2.0], [-1.0, 1.0, 2.0]])
def test_tabulated_rejects_bad_grids(grid):
    with pytest.raises(ValueError):
        pr.tabulated(grid, np.ones(3))


def test_tabulated_rejects_nonfinite_values():
    with pytest.raises(ValueError):
        pr.tabulated([1.0, 2.0, 3.0], [1.0, np.nan, 2.0])


def test_tabulated_interpolation_is_accurate(gauss_table):
    r = np.linspace(0.05, 7.5, 301)
    assert np.max(np.abs(gauss_table(r) - np.exp(-r * r))) < 1e-10


def test_tabulated_power_tail_extrapolates():
    grid = pr.default_grid(4.0)
    p = pr.materialize(lambda r: (1 + r * r) ** -1.5, grid, decay_exponent=3.0)
    r = np.array([5.0, 10.0, 40.0])
    np.testing.assert_allclose(p(r), (1 + r * r) ** -1.5, rtol=1e-3)


def test_zero_exponent_is_factored_out():
    grid = pr.default_grid(4.0)
    p = pr.materialize(lambda r: r**-1.5 * np.exp(-r * r), grid, zero_exponent=1.5)
    r = np.array([0.03, 0.05, 0.3])
    np.testing.assert_allclose(p(r), r**-1.5 * np.exp(-r * r), rtol=1e-8)


def test_derived_profiles():
    g = pr.gaussian()
    r = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(g.times_power(2.0)(r), r**2 * np.exp(-r * r))
    np.testing.assert_allclose(g.scaled(3.0)(r), 3 * np.exp(-r * r))
    np.testing.assert_allclose(g.dilated(2.0)(r), np.exp(-r * r / 4))
    assert g.times_power(2.0).zero_exponent == -2.0


def test_csv_round_trip_with_metadata(tmp_path):
    grid = pr.default_grid(3.0, h=0.05)
    p = pr.materialize(lambda r: (1 + r * r) ** -2, grid, decay_exponent=4.0, name="c4")
    path = tmp_path / "c4.csv"
    pr.write_csv(path, p.grid, p.values)
    pr.write_meta(tmp_path / "c4.json", p)
    q = pr.read_csv(path)
    assert q.decay_exponent == 4.0 and q.zero_exponent == 0.0 and not q.log_factor
    np.testing.assert_allclose(q.values, p.values, rtol=1e-8)
    meta = json.loads((tmp_path / "c4.json").read_text())
    assert set(meta) == {"zero_exponent", "decay_exponent", "log_factor"}


def test_csv_without_sidecar_defaults_to_fast_decay(tmp_path):
    path = tmp_path / "p.csv"
    pr.write_csv(path, [0.1, 0.2, 0.3], [1.0, 0.9, 0.8])
    assert math.isinf(pr.read_csv(path).decay_exponent)


def test_csv_header_is_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n0.1,1\n0.2,2\n")
    with pytest.raises(ValueError):
        pr.read_csv(path)


def test_bundled_gaussian_profile():
    from importlib.resources import files

    p = pr.read_csv(files("mixradon") / "data" / "gaussian.csv")
    r = np.linspace(0.1, 6.0, 50)
    assert np.max(np.abs(p(r) - np.exp(-r * r))) < 1e-8
