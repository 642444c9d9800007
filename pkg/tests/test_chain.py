import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tickchain.chain import (
    ChainSpec,
    apply_coupling_disorder,
    apply_onsite_disorder,
    build_effective_hamiltonian,
    stream,
)
from tickchain.errors import InvalidSpecError


def test_build_n2_matches_template():
    h = build_effective_hamiltonian(ChainSpec(2, [0.5]))
    expect = np.array([[-0.5j, 0.5], [0.5, -0.5j]])
    assert np.allclose(h.matrix, expect, atol=1e-15)
    h.validate()


def test_build_decoupled_sites():
    h = build_effective_hamiltonian(ChainSpec(3, [0.0, 0.0]))
    assert np.allclose(h.matrix, np.diag([-0.5j, 0.0, -0.5j]), atol=1e-15)


def test_build_n1_sums_both_corners():
    h = build_effective_hamiltonian(ChainSpec(1, []))
    assert np.allclose(h.matrix, [[-1.0j]])
    # resonant level: this matrix must reproduce T(E) = 1/(E^2+1)
    from tickchain.landauer import transmission

    for e in (0.0, 0.7, 2.0):
        assert transmission(h, e) == pytest.approx(1.0 / (e**2 + 1.0), abs=1e-12)


def test_shift_length_mismatch():
    with pytest.raises(InvalidSpecError):
        build_effective_hamiltonian(ChainSpec(3, [0.4, 0.4]), shifts=[0.1, 0.2])


def test_spec_validation_errors():
    with pytest.raises(InvalidSpecError):
        ChainSpec(0, [])
    with pytest.raises(InvalidSpecError):
        ChainSpec(3, [0.5])  # wrong length
    with pytest.raises(InvalidSpecError):
        ChainSpec(2, [-0.1])
    with pytest.raises(InvalidSpecError):
        ChainSpec(2, [0.5], occ_left=1.3)
    with pytest.raises(InvalidSpecError):
        ChainSpec(2, [0.5], occ_left=0.9, occ_right=0.0, entropy=1.0)


def test_entropy_parametrization():
    spec = ChainSpec.from_entropy(4, [0.3, 0.3, 0.3], 2.0)
    assert spec.occ_left == pytest.approx(1.0 / (1.0 + np.exp(-2.0)), abs=1e-15)
    assert spec.occ_left + spec.occ_right == pytest.approx(1.0, abs=1e-15)
    assert ChainSpec.from_entropy(2, [0.4], np.inf).occ_left == 1.0


def test_serialization_roundtrip():
    spec = ChainSpec(3, [0.4, 0.5], boundary_rate=1.2, occ_left=0.8, occ_right=0.2, seed=42)
    doc = json.loads(spec.to_json())
    assert set(doc) == {"n_sites", "couplings", "boundary_rate", "occ_left", "occ_right", "entropy", "seed"}
    back = ChainSpec.from_json(spec.to_json())
    assert back.n_sites == 3 and back.seed == 42
    assert np.allclose(back.couplings, spec.couplings)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**31 - 1))
def test_hamiltonian_structure_properties(n, seed):
    r = stream(seed)
    g = r.uniform(0.05, 2.0, n - 1)
    shifts = r.uniform(-0.5, 0.5, n)
    h = build_effective_hamiltonian(ChainSpec(n, g), shifts)
    m = h.matrix
    off = m - np.diag(np.diag(m))
    assert np.allclose(off.imag, 0.0, atol=0.0)
    assert np.allclose(off, off.T)
    imag = np.diag(m).imag
    if n == 1:
        assert imag[0] == -1.0
    else:
        assert imag[0] == -0.5 and imag[-1] == -0.5
        assert np.all(imag[1:-1] == 0.0)
    assert np.allclose(np.diag(m).real, shifts)


def test_onsite_disorder_moments_and_determinism():
    spec = ChainSpec(2, [0.4])
    _, s1 = apply_onsite_disorder(spec, 0.1, stream(9))
    _, s2 = apply_onsite_disorder(spec, 0.1, stream(9))
    assert np.array_equal(s1, s2)
    _, zero = apply_onsite_disorder(spec, 0.0, stream(9))
    assert np.all(zero == 0.0)
    big = ChainSpec(100_000, np.full(99_999, 0.4))
    _, shifts = apply_onsite_disorder(big, 0.1, stream(3))
    assert shifts.size == big.n_sites  # exactly N draws
    assert shifts.var() == pytest.approx(0.1**2 / 12.0, rel=0.02)
    assert np.abs(shifts).max() <= 0.05
    with pytest.raises(InvalidSpecError):
        apply_onsite_disorder(spec, -0.1, stream(0))


def test_coupling_disorder_contract():
    spec = ChainSpec(6, np.full(5, 0.5))
    same = apply_coupling_disorder(spec, 0.0, stream(1))
    assert np.array_equal(same.couplings, spec.couplings)
    a = apply_coupling_disorder(spec, 0.005 * 0.5, stream(4))
    b = apply_coupling_disorder(spec, 0.005 * 0.5, stream(4))
    assert np.array_equal(a.couplings, b.couplings)
    with pytest.raises(InvalidSpecError):
        apply_coupling_disorder(spec, 1.0, stream(0))  # >= 2 min(g)
    # zero-mean noise: the sample mean over many draws stays at g
    means = [apply_coupling_disorder(spec, 0.0025, stream(5, k)).couplings.mean() for k in range(10_000)]
    err = np.std(means) / np.sqrt(len(means))
    assert np.mean(means) == pytest.approx(0.5, abs=4 * err + 1e-12)


def test_disorder_streams_independent_of_order():
    spec = ChainSpec(4, np.full(3, 0.4))
    direct = [apply_onsite_disorder(spec, 0.2, stream(77, k))[1] for k in (5, 1, 3)]
    reordered = {k: apply_onsite_disorder(spec, 0.2, stream(77, k))[1] for k in (1, 3, 5)}
    for k, arr in zip((5, 1, 3), direct):
        assert np.array_equal(arr, reordered[k])
