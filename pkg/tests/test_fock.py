import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triplewell.fock import (ModelParams, build_hamiltonian, build_hamiltonian_multisector,
                             diagonalize, enumerate_basis, mean_occupations, solve,
                             write_spectrum_csv)


@pytest.mark.parametrize("n, size", [(0, 1), (1, 3), (2, 6), (30, 496)])
def test_basis_size(n, size):
    assert len(enumerate_basis(n)) == size


def test_basis_n0_single_state():
    assert enumerate_basis(0).states == ((0, 0, 0),)


def test_basis_order_and_index():
    b = enumerate_basis(4)
    assert b.states[0] == (4, 0, 0) and b.states[-1] == (0, 0, 4)
    assert len(set(b.states)) == len(b)
    for i, s in enumerate(b.states):
        assert sum(s) == 4 and min(s) >= 0
        assert b.index_of(s) == i
    with pytest.raises(KeyError):
        b.index_of((1, 1, 1))


def test_negative_n_rejected():
    with pytest.raises(ValueError):
        enumerate_basis(-1)
    with pytest.raises(ValueError):
        ModelParams(n_particles=-2)


def test_matrix_elements_n1(stated_params):
    p = stated_params.replace(n_particles=1)
    b = enumerate_basis(1)
    h = build_hamiltonian(p, b)
    i100, i010 = b.index_of((1, 0, 0)), b.index_of((0, 1, 0))
    assert h[i100, i100] == pytest.approx(0.375, abs=1e-14)
    assert h[i010, i100] == pytest.approx(-0.25, abs=1e-14)
    assert h[b.index_of((0, 0, 1)), i100] == 0.0


def test_params_mismatch():
    with pytest.raises(ValueError):
        build_hamiltonian(ModelParams(n_particles=3), enumerate_basis(2))


def test_no_coupling_between_sectors(params):
    h, states = build_hamiltonian_multisector(params.replace(n_particles=4), [3, 4, 5])
    tot = np.array([sum(s) for s in states])
    cross = tot[:, None] != tot[None, :]
    assert np.all(h[cross] == 0.0)


def test_symmetric_and_number_conserving(params):
    b = enumerate_basis(params.n_particles)
    h = build_hamiltonian(params, b)
    assert np.array_equal(h, h.T)
    n_op = np.diag([float(sum(s)) for s in b.states])
    assert np.max(np.abs(h @ n_op - n_op @ h)) == 0.0


def test_spectrum_bounds(system):
    _, es = system
    assert len(es) == 496
    assert es.energies[0] == pytest.approx(23.907, abs=5e-3)
    assert es.energies[-1] == pytest.approx(96.393, abs=5e-3)


def test_eigensystem_orthonormal_and_trace(system, params):
    basis, es = system
    v = es.vectors
    assert np.max(np.abs(v.T @ v - np.eye(len(es)))) < 1e-10
    assert np.all(np.diff(es.energies) >= 0)
    h = build_hamiltonian(params, basis)
    assert es.energies.sum() == pytest.approx(np.trace(h), rel=1e-8)


def test_sign_convention(system):
    _, es = system
    v = es.vectors
    piv = np.argmax(np.abs(v), axis=0)
    assert np.all(v[piv, np.arange(v.shape[1])] > 0)


def test_state_labels_are_one_based(system):
    _, es = system
    assert es.energy(1) == es.energies[0]
    with pytest.raises(IndexError):
        es.state(0)


def test_n0_eigenvalue_is_diagonal(params):
    p = params.replace(n_particles=0)
    b, es = solve(p)
    assert es.energies[0] == pytest.approx(build_hamiltonian(p, b)[0, 0])
    assert es.energies[0] == pytest.approx(p.zero_point)


def test_n2_against_characteristic_polynomial(params):
    p = params.replace(n_particles=2)
    h = build_hamiltonian(p, enumerate_basis(2))
    roots = np.sort(np.roots(np.poly(h)).real)
    assert np.allclose(diagonalize(h).energies, roots, atol=1e-9)


def test_nonsymmetric_rejected():
    h = np.array([[1.0, 2.0], [2.0 + 1e-9, 0.0]])
    with pytest.raises(ValueError):
        diagonalize(h)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(0, 6), w=st.floats(-0.5, 0.5), x=st.floats(0.0, 0.3),
       k=st.floats(0.0, 1.0))
def test_mirror_symmetry_of_spectrum(n, w, x, k):
    p = ModelParams((w, 0.0, -w), (x, x, x), k, k, n)
    e1 = solve(p)[1].energies
    e2 = solve(p.mirrored())[1].energies
    assert np.allclose(e1, e2, atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 10**6))
def test_eigenvalue_sum_is_trace(n, seed):
    rng = np.random.default_rng(seed)
    p = ModelParams(tuple(rng.normal(size=3)), tuple(rng.uniform(0, 0.3, 3)),
                    float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), n)
    b, es = solve(p)
    assert es.energies.sum() == pytest.approx(np.trace(build_hamiltonian(p, b)), rel=1e-8, abs=1e-10)


def test_mean_occupations_sum_to_n(system):
    basis, es = system
    for k in (1, 200, 496):
        assert mean_occupations(es.state(k), basis).sum() == pytest.approx(30.0)


def test_params_json_roundtrip(tmp_path):
    p = ModelParams(n_particles=7, k12=0.3)
    path = tmp_path / "m.json"
    path.write_text(json.dumps(p.to_dict()))
    assert ModelParams.from_json(path) == p
    with pytest.raises(ValueError):
        ModelParams.from_dict({"omega": [0, 0, 0], "bogus": 1})


def test_spectrum_csv(tmp_path, system):
    _, es = system
    path = tmp_path / "s.csv"
    write_spectrum_csv(path, es.energies)
    lines = path.read_text().splitlines()
    assert lines[0] == "index,energy" and len(lines) == 497
    assert lines[1].startswith("1,23.907")
