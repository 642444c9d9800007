import math

import numpy as np
import pytest

from tickchain.chain import ChainSpec
from tickchain.errors import InvalidSpecError
from tickchain.moments import ExactMoments
from tickchain.oracle import DenseOracle, validate_against_dense_oracle, _jw_annihilator


def test_jordan_wigner_algebra():
    n = 4
    cs = [_jw_annihilator(i, n) for i in range(n)]
    eye = np.eye(2**n)
    for i in range(n):
        for j in range(n):
            anti = cs[i] @ cs[j].conj().T + cs[j].conj().T @ cs[i]
            assert np.allclose(anti, eye if i == j else 0.0, atol=1e-13)
            assert np.allclose(cs[i] @ cs[j] + cs[j] @ cs[i], 0.0, atol=1e-13)


def test_n1_current_both_routes():
    oracle = DenseOracle.build(ChainSpec(1, []))
    assert oracle.current() == pytest.approx(0.5, abs=1e-12)
    assert oracle.diffusion() == pytest.approx(0.25, abs=1e-10)


def test_n2_finite_bias_current_agreement():
    spec = ChainSpec.from_entropy(2, [0.5], 3.0)
    oracle = DenseOracle.build(spec)
    ex = ExactMoments(spec)
    assert abs(oracle.current() - ex.current) < 1e-8
    assert np.abs(oracle.covariance() - ex.c_ss).max() < 1e-8


def test_n3_full_bias_steady_state():
    spec = ChainSpec(3, [0.45, 0.45])
    oracle = DenseOracle.build(spec)
    ex = ExactMoments(spec)
    assert np.abs(oracle.covariance() - ex.c_ss).max() < 1e-8
    assert np.abs(oracle.jump_dressed_covariance() - ex.jump_dressed).max() < 1e-8
    assert abs(oracle.diffusion() - ex.diffusion) < 1e-8
    for tau in (0.4, 1.7):
        assert abs(oracle.two_time_correlator(tau) - ex.correlator(tau)) < 1e-9


def test_report_structure_and_pass():
    report = validate_against_dense_oracle(2, sigmas=(math.inf, 1.0))
    assert len(report.cases) == 2
    assert report.passed(1e-8)
    assert report.worst < 1e-10


def test_size_limit():
    with pytest.raises(InvalidSpecError):
        DenseOracle.build(ChainSpec(5, np.full(4, 0.4)))
