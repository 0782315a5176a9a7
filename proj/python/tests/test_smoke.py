import math

import numpy as np
import pytest

import magspec


def test_comparison_closed_form():
    assert magspec.exact_inf_L(1.0, -1.0) == 0.75
    well = magspec.PotentialSpec.square_well(1.0)
    oracle = magspec.square_well_critical_oracle(1.0, 1.0)
    assert abs(magspec.critical_lambda(1.0, well) - oracle) < 1e-4


def test_assembled_matrix_is_hermitian_and_matches_lanczos():
    p = magspec.ModelParams(omega=1.0, b_field=1.0, lambda_=-1.0)
    g = magspec.Grid2D.make(2.0, 2.0, 15, 15)
    dense = magspec.dense_matrix(p, g)
    assert np.allclose(dense, dense.conj().T, atol=1e-14)
    exact = np.linalg.eigvalsh(dense)[:3]
    res = magspec.lowest_eigenvalues(p, g, k=3, tol=1e-10)
    assert res["converged"]
    assert np.allclose(res["eigenvalues"], exact, atol=1e-8)


def test_band_minimum_near_threshold():
    p = magspec.ModelParams(omega=1.0, b_field=1.0, lambda_=0.0)
    band = magspec.band_scan(p, 6.0, n_xi=21)
    assert band["minimum"] == pytest.approx(math.sqrt(2.0), abs=1e-3)


def test_classifier_labels():
    t = math.sqrt(2.0)
    assert magspec.classify([-64.2, -294.9, -1240.8], t) == "Supercritical"
    assert magspec.classify([0.2029, 0.0553, 0.01398], t) == "Critical"
    assert magspec.classify([1.4461, 1.4461], t) == "Subcritical"


def test_errors_carry_codes():
    with pytest.raises(magspec.MagspecError) as info:
        magspec.resolved_config("model.colour = 1\n")
    assert magspec.exit_code_for_message(str(info.value)) == 2
    with pytest.raises(magspec.MagspecError) as info:
        magspec.lowest_eigenvalues(magspec.ModelParams(lambda_=1.0), magspec.Grid2D.make(1, 1, 5, 5))
    assert str(info.value).startswith("RejectsPositiveLambda")


def test_run_command_is_deterministic(tmp_path):
    cfg = {"grid.lx": 3, "grid.ly": 3, "grid.h": 0.2, "solver.k": 3, "experiment.band_n": 6}
    a = magspec.run("spectrum", cfg, tmp_path / "a")
    b = magspec.run("spectrum", cfg, tmp_path / "b")
    assert a == b
    assert (tmp_path / "a" / "spectrum.csv").read_bytes() == (tmp_path / "b" / "spectrum.csv").read_bytes()
    assert a["config"]["grid.lx"] == "3"
    assert 0.0 < a["results"]["spectrum"]["eigenvalues"][0]
