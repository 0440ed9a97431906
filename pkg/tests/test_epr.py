import math

import numpy as np
import pytest

from qexlab import epr, expanders, linalg
from qexlab.errors import EnsembleError, ParameterError, RegisterNameError


def rand_state(D, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(D * D) + 1j * rng.standard_normal(D * D)
    return linalg.RegisteredState.normalized((("L", D), ("R", D)), v)


@pytest.fixture(scope="module")
def haar48():
    return expanders.build_ensemble("haar", 8, 4, seed=0)


def test_completeness_and_post_state(haar48):
    phi = linalg.maximally_entangled(8)
    for run in (epr.run_basic, epr.run_two_ancilla, epr.run_classical):
        t = run(haar48, phi)
        assert abs(t.accept_prob - 1) <= 1e-12
        assert np.linalg.norm(t.post_state_accept.amplitudes - phi.amplitudes) <= 1e-10


def test_trivial_ensemble_accepts_everything():
    e = expanders.identity_ensemble(3, 1)
    assert epr.run_basic(e, rand_state(3, 0)).accept_prob == pytest.approx(1.0, abs=1e-12)


def test_soundness_worst_case(haar48):
    lam = expanders.expander_lambda(haar48).lambda_
    worst = epr.worst_orthogonal_state(haar48)
    assert abs(worst.overlap(linalg.maximally_entangled(8))) <= 1e-10
    assert epr.run_basic(haar48, worst).accept_prob <= lam**2 + 1e-9
    it = epr.worst_orthogonal_state(haar48, mode="iterative")
    assert epr.run_basic(haar48, it).accept_prob == pytest.approx(epr.run_basic(haar48, worst).accept_prob, abs=1e-8)


def test_soundness_over_orthonormal_basis():
    e = expanders.build_ensemble("haar", 5, 3, seed=3)
    lam = expanders.expander_lambda(e).lambda_
    phi = expanders.phi_vector(5)
    basis = np.linalg.svd(np.eye(25) - np.outer(phi, phi))[0][:, :24]
    for col in basis.T:
        st = linalg.RegisteredState.normalized((("L", 5), ("R", 5)), col)
        assert epr.run_basic(e, st).accept_prob <= lam**2 + 1e-9


def test_two_ancilla_matches_basic(haar48):
    for seed in range(3):
        s = rand_state(8, seed)
        assert abs(epr.run_two_ancilla(haar48, s).accept_prob - epr.run_basic(haar48, s).accept_prob) <= 1e-12
    t = epr.run_two_ancilla(haar48, linalg.maximally_entangled(8))
    assert t.resources.epr_consumed == 1 and t.resources.qubits_sent == 2


def test_basis_state_accept_probability():
    e = expanders.build_ensemble("haar", 4, 3, seed=5)
    st = linalg.product_state((("L", 4), ("R", 4)), (1, 2))
    m = epr.measurement_operator(e)
    assert epr.run_two_ancilla(e, st).accept_prob == pytest.approx(np.linalg.norm(m @ st.amplitudes) ** 2,
                                                                   abs=1e-12)


def test_input_register_checks(haar48):
    s = rand_state(8, 0)
    swapped = s.permute(("R", "L"))
    assert epr.run_basic(haar48, swapped).accept_prob == pytest.approx(epr.run_basic(haar48, s).accept_prob)
    bad = linalg.RegisteredState.normalized((("A", 8), ("B", 8)), s.amplitudes)
    with pytest.raises(RegisterNameError):
        epr.run_basic(haar48, bad)


def test_effect_identity_on_mixed_input():
    e = expanders.build_ensemble("haar", 3, 3, seed=8)
    rng = np.random.default_rng(0)
    a = rng.standard_normal((9, 4)) + 1j * rng.standard_normal((9, 4))
    rho = a @ a.conj().T
    rho /= np.trace(rho)
    p = epr.accept_probability_mixed(e, rho)
    assert abs(p - np.trace(epr.effect(e) @ rho).real) <= 1e-11


def test_reject_post_state():
    e = expanders.build_ensemble("haar", 3, 3, seed=1)
    s = rand_state(3, 4)
    post = epr.reject_post_state(e, s)
    w, v = np.linalg.eigh(epr.effect(e))
    root = (v * np.sqrt(np.clip(1 - w, 0, None))) @ v.conj().T
    target = root @ s.amplitudes
    assert abs(abs(np.vdot(target / np.linalg.norm(target), post.amplitudes)) - 1) <= 1e-10
    assert epr.reject_post_state(e, linalg.maximally_entangled(3)) is None


def test_shared_randomness_effect():
    e = expanders.build_ensemble("margulis", 9, 8)
    eff = epr.shared_randomness_effect(e)
    formula = (np.eye(81) + expanders.superop_matrix(e)) / 2
    assert np.abs(eff - formula).max() <= 1e-11
    t = epr.run_shared_randomness(e, linalg.maximally_entangled(9))
    assert t.accept_prob == pytest.approx(1.0, abs=1e-12)
    assert t.resources.as_list() == [1, 0, 0, 2]
    s = rand_state(9, 2)
    assert epr.run_shared_randomness(e, s).accept_prob == pytest.approx(
        np.vdot(s.amplitudes, eff @ s.amplitudes).real, abs=1e-12)


def test_shared_randomness_needs_adjoint_pairs():
    e = expanders.build_ensemble("haar", 4, 8, seed=0)
    with pytest.raises(EnsembleError):
        epr.run_shared_randomness(e, linalg.maximally_entangled(4))


def test_iterated():
    e = expanders.build_ensemble("haar", 8, 3, seed=0)
    s = rand_state(8, 1)
    assert epr.run_iterated(e, 1, s).accept_prob == pytest.approx(epr.run_basic(e, s).accept_prob, abs=1e-14)
    lam = expanders.expander_lambda(e).lambda_
    prod = expanders.product_ensemble(e, 2)
    assert expanders.expander_lambda(prod).lambda_ <= lam**2 + 1e-6
    assert epr.run_iterated(e, 3, linalg.maximally_entangled(8)).accept_prob == pytest.approx(1.0, abs=1e-12)


def test_iterated_soundness_monotone():
    e = expanders.build_ensemble("haar", 3, 3, seed=0)
    lams = [expanders.expander_lambda(expanders.product_ensemble(e, k)).lambda_ for k in (1, 2, 3)]
    assert lams[0] >= lams[1] - 1e-12 >= lams[2] - 2e-12


def test_passing_inputs_are_only_phi():
    for D in (2, 4, 8):
        e = expanders.build_ensemble("haar", D, 3, seed=D)
        basis = expanders.commutant_basis(e.unitaries)
        assert basis.shape[0] == 1
        x = basis[0] / basis[0][0, 0]
        assert np.allclose(x, np.eye(D), atol=1e-9)
        assert epr.passing_subspace(e).shape[1] == 1


def test_resource_cost():
    assert epr.resource_cost("basic", 2**-10).qubits_sent == 20
    assert epr.resource_cost("shared-randomness", 0.5).as_list() == [1, 0, 0, 2]
    r = epr.resource_cost("classical", 2**-4)
    assert (r.cbits_sent, r.epr_consumed) == (32, 32)
    assert epr.resource_cost("efficient", 2**-4, C=3).qubits_sent == 12
    with pytest.raises(ParameterError):
        epr.resource_cost("efficient", 0.1)
    with pytest.raises(ParameterError):
        epr.resource_cost("basic", 1.5)
    with pytest.raises(ParameterError):
        epr.resource_cost("hl07", 0.1)
    assert epr.resource_cost("hl07", 0.5, n=4).epr_consumed == 8


def test_ancilla_qubits():
    assert [epr.ancilla_qubits(d) for d in (1, 2, 3, 4, 5, 8)] == [0, 1, 2, 2, 3, 3]
    assert epr.SHARED_RANDOMNESS_EPSILON == pytest.approx((8 + math.sqrt(5)) / 16)


def test_sample_outcome_seeded():
    t = epr.run_basic(expanders.build_ensemble("haar", 2, 3, seed=0), rand_state(2, 0))
    a = epr.sample_outcome(t, 50, seed=3)
    assert np.array_equal(a, epr.sample_outcome(t, 50, seed=3))
