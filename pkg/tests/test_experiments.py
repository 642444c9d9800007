import json
import math

import numpy as np
import pytest

from tickchain.errors import InvalidSpecError
from tickchain import experiments as ex


def small_disorder_config(samples=24, seed=5):
    return ex.ExperimentConfig(
        kind="disorder_onsite",
        sweep={"n_sites": [8], "strength": [0.0, 0.05, 0.1, 0.2]},
        samples=samples,
        seed=seed,
        options={"budget": 1500},
    )


def test_config_validation_and_hash():
    with pytest.raises(InvalidSpecError):
        ex.ExperimentConfig(kind="nonsense", sweep={"x": [1]})
    with pytest.raises(InvalidSpecError):
        ex.ExperimentConfig(kind="scaling", sweep={})
    a = small_disorder_config()
    b = small_disorder_config()
    assert a.config_hash == b.config_hash
    c = small_disorder_config(seed=6)
    assert a.config_hash != c.config_hash
    d = ex.ExperimentConfig.from_json(json.dumps(a.to_dict()))
    assert d.config_hash == a.config_hash


def test_result_table_contracts(tmp_path):
    with pytest.raises(InvalidSpecError):
        ex.ResultTable({"a": [1, 2], "b": [1]}, {"config_hash": "x", "seed": 0, "version": "v", "wall_time_s": 0})
    with pytest.raises(InvalidSpecError):
        ex.ResultTable({"a": [1]}, {"seed": 0})
    table = ex.ResultTable({"a": [1.0, 2.0]}, {"config_hash": "x", "seed": 0, "version": "v", "wall_time_s": 0.1})
    paths = table.write(tmp_path, "demo")
    text = paths[0].read_text()
    assert text.endswith("\n") and text.splitlines()[0] == "a"
    assert json.loads(paths[1].read_text())["config_hash"] == "x"


def test_disorder_zero_strength_rows_exact():
    table, fits, _ = ex.run_disorder(small_disorder_config(samples=6))
    cols = table.columns
    zero_rows = [i for i, w in enumerate(cols["strength"]) if w == 0.0]
    for i in zero_rows:
        assert cols["excess_mean"][i] == 0.0
        assert cols["fano_mean"][i] == cols["fano_clean"][i]


def test_disorder_reproducibility():
    t1, f1, _ = ex.run_disorder(small_disorder_config())
    t2, f2, _ = ex.run_disorder(small_disorder_config())
    for k in t1.columns:
        assert np.array_equal(t1.columns[k], t2.columns[k])
    assert f1[8].exponent == f2[8].exponent


def test_disorder_sample_error_scaling():
    narrow = ex.run_disorder(small_disorder_config(samples=12))[0]
    wide = ex.run_disorder(small_disorder_config(samples=48))[0]
    i = 2  # one strictly disordered cell
    assert narrow.columns["strength"][i] > 0
    ratio = narrow.columns["excess_stderr"][i] / wide.columns["excess_stderr"][i]
    assert 1.3 < ratio < 3.2  # ~ sqrt(4) with sampling noise


def test_disorder_onsite_alpha_small_scale():
    config = ex.ExperimentConfig(
        kind="disorder_onsite",
        sweep={"n_sites": [10], "strength": [0.02, 0.04, 0.08, 0.16]},
        samples=60,
        seed=3,
        options={"budget": 2500, "fit_fraction": 1.0},
    )
    _, fits, _ = ex.run_disorder(config)
    assert fits[10].exponent == pytest.approx(2.0, abs=0.3)


def test_scaling_single_length_no_fit():
    config = ex.ExperimentConfig(kind="scaling", sweep={"n_sites": [8]}, seed=2, options={"budget": 1200})
    table, fit = ex.run_scaling(config)
    assert fit is None
    assert len(table.columns["fano"]) == 1
    assert table.manifest["config_hash"] == config.config_hash


def test_thermal_table_identity_columns():
    config = ex.ExperimentConfig(
        kind="thermal",
        sweep={"sigma": [5.5, math.inf]},
        seed=1,
        options={"n_sites": 8, "budget": 1500},
    )
    table = ex.run_thermal(config)
    cols = table.columns
    inf_row = cols["sigma"].index(math.inf)
    fin_row = 1 - inf_row
    assert cols["diffusion"][inf_row] == cols["diffusion_wbl"][inf_row]
    assert abs(cols["diffusion"][fin_row] - cols["diffusion_wbl"][fin_row]) / cols["diffusion_wbl"][fin_row] < 1e-6
    assert cols["n_star"][fin_row] == pytest.approx(cols["current"][fin_row] * cols["t_star"][fin_row])


def test_validate_runner():
    config = ex.ExperimentConfig(kind="validate", sweep={}, seed=0, options={"n_sites": 2, "sigmas": [math.inf, 2.0]})
    table, report = ex.run_validate(config)
    assert report.passed(1e-8)
    assert max(table.columns["worst_deviation"]) < 1e-8
