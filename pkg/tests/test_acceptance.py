"""Acceptance criteria A1-A11, each at its stated tolerance."""
import math
import subprocess
import sys

import numpy as np
import pytest

from qexlab import arealaw, circuit, cli, epr, expanders, linalg

acc = pytest.mark.acceptance


def _all_kinds(D):
    out = [
        expanders.build_ensemble("haar", D, 3, seed=1),
        expanders.build_ensemble("haar-with-identity", D, 3, seed=1),
        expanders.build_ensemble("explicit", D, 2, unitaries=[np.eye(D), linalg.haar_unitary(D, seed=2)]),
        expanders.product_ensemble(expanders.build_ensemble("haar", D, 3, seed=3), 2),
    ]
    n = math.isqrt(D)
    if n * n == D:
        out.append(expanders.build_ensemble("margulis", D, 8))
    return out


@acc("A1", "fixed point of the superoperator")
def test_A1_fixed_point():
    for D in (2, 4, 9, 16):
        phi = expanders.phi_vector(D)
        for ens in _all_kinds(D):
            assert np.linalg.norm(expanders.apply_superop(ens, phi) - phi) <= 1e-12, (ens.kind, D)
            assert expanders.expander_lambda(ens).fixed_point_residual <= 1e-12


@acc("A2", "operator-norm gap equals lambda")
def test_A2_gap_identity():
    for D in range(2, 13):
        for ens in (expanders.build_ensemble("haar", D, 3, seed=D),
                    expanders.build_ensemble("haar-with-identity", D, 3, seed=D)):
            phi = expanders.phi_vector(D)
            norm = np.linalg.norm(expanders.superop_matrix(ens) - np.outer(phi, phi), 2)
            lam = expanders.expander_lambda(ens, mode="iterative", tol=1e-12).lambda_
            assert abs(norm - lam) <= 1e-9, D


@acc("A3", "EPR test completeness and soundness")
def test_A3_epr_tester():
    for d in (3, 4):
        for D in (4, 8):
            ens = expanders.build_ensemble("haar", D, d, seed=10 * d + D)
            lam = expanders.expander_lambda(ens).lambda_
            assert abs(epr.run_basic(ens, linalg.maximally_entangled(D)).accept_prob - 1) <= 1e-12
            worst = epr.worst_orthogonal_state(ens)
            assert epr.run_basic(ens, worst).accept_prob <= lam**2 + 1e-9


@acc("A4", "shared-randomness effect identity and 0.64 soundness at D = 9")
def test_A4_shared_randomness():
    ens = expanders.build_ensemble("margulis", 9, 8)
    eff = epr.shared_randomness_effect(ens)
    formula = (np.eye(81) + sum(np.kron(u, u.conj()) for u in ens.unitaries) / 8) / 2
    assert np.abs(eff - formula).max() <= 1e-11
    phi = expanders.phi_vector(9)
    norm = np.linalg.norm(eff - np.outer(phi, phi), 2)
    assert norm <= 0.64 + 1e-9, f"measured ||effect - phi phi^H|| = {norm:.6f}"


@acc("A5", "four-particle chain: frustration-free, unique, log2 D entropy, gap >= c/4")
def test_A5_four_particle():
    for D in (2, 4, 8, 16):
        ens, rep = expanders.certified_ensemble(D, 3, seed=0)
        sr = arealaw.certify_h4(ens, rep, mode="dense")
        assert sr.ground_energy <= 1e-10, D
        assert sr.ground_degeneracy == 1, D
        assert abs(sr.extras["entropy"] - math.log2(D)) <= 1e-8, D
        assert sr.gap >= rep.c / 4 - 1e-9, D


@acc("A6", "two-projector minimum eigenvalue formula")
def test_A6_two_projectors():
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 13))
        projs = []
        for _ in range(2):
            k = int(rng.integers(1, n + 1))
            q = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))[0]
            projs.append(q @ q.conj().T)
        r = arealaw.min_eig_two_projectors(*projs)
        worst = max(worst, abs(r.min_eig - r.predicted))
    assert worst <= 1e-9


@acc("A7", "Kitaev gap scales as T^-2 and stays frustration-free")
def test_A7_kitaev_scaling():
    rows, slope = circuit.kitaev_gap_scan([4, 8, 16, 32], D=1)
    assert all(r["E0"] <= 1e-10 for r in rows)
    assert -2.5 <= slope <= -1.5, slope


@acc("A8", "H'_LMR at D = 2, T = 7: entropy >= 0.9, gap >= (1 - lambda) / 8, E0 <= 2 / T")
def test_A8_hprime():
    ens, rep = expanders.certified_ensemble(2, 3, seed=0)
    sr = circuit.certify_hprime(ens, 7, rep, mode="dense")
    assert sr.ground_energy <= 2 / 7
    assert sr.gap >= 0.5 * rep.c / 4
    assert sr.extras["entropy"] >= 0.9, f"ground entropy {sr.extras['entropy']:.4f} bits"


@acc("A9", "two-clock history state is the unique ground state with dD flat Schmidt spectrum")
def test_A9_two_clock():
    for D in (2, 4):
        ens, _ = expanders.certified_ensemble(D, 3, seed=0)
        sr = circuit.certify_two_clock(ens)
        assert sr.ground_energy <= 1e-10
        assert sr.ground_degeneracy == 1
        assert sr.extras["overlap_deficit"] <= 1e-8
        sd = linalg.schmidt(circuit.two_clock_history_state(ens), circuit.TWO_CLOCK_CUT)
        nz = sd.coefficients[sd.coefficients**2 > linalg.SCHMIDT_CUTOFF]
        assert nz.size == 3 * D and np.ptp(nz) <= 1e-10
        assert abs(sr.extras["entropy"] - math.log2(3 * D)) <= 1e-8


def _state_with_overlap(rng, D, a, low_rank):
    phi = np.eye(D).reshape(-1) / np.sqrt(D)
    if low_rank:
        r = int(rng.integers(1, 3))
        chi = sum(np.kron(rng.standard_normal(D) + 1j * rng.standard_normal(D),
                          rng.standard_normal(D) + 1j * rng.standard_normal(D)) for _ in range(r))
    else:
        chi = rng.standard_normal(D * D) + 1j * rng.standard_normal(D * D)
    chi = chi - phi * np.vdot(phi, chi)
    chi /= np.linalg.norm(chi)
    v = a * phi + math.sqrt(max(0.0, 1 - a * a)) * chi
    return linalg.RegisteredState.normalized((("L", D), ("R", D)), v)


@acc("A10", "entropy lower bound from overlap with a maximally entangled state")
def test_A10_entropy_bound():
    for D in (2, 4, 16, 64):
        assert circuit.entropy_lower_bound(0, D).bound_bits == math.log2(D)
    vals = [circuit.entropy_lower_bound(e, 16).bound_bits for e in np.linspace(0, 0.99, 34)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    eps = 0.05
    bound = circuit.entropy_lower_bound(eps, 16).bound_bits
    rng = np.random.default_rng(10)
    for i in range(500):
        st = _state_with_overlap(rng, 16, rng.uniform(1 - eps, 1), low_rank=i % 2 == 0)
        assert abs(np.vdot(expanders.phi_vector(16), st.amplitudes)) >= 1 - eps - 1e-12
        assert linalg.entanglement_entropy(st, (["L"], ["R"])) >= bound


ACCEPTANCE_COMMANDS = [
    ["expander", "--kind", "margulis", "--n", "3"],
    ["eprtest", "--variant", "basic", "--d", "4", "--D", "8", "--seed", "3"],
    ["eprtest", "--variant", "shared-randomness", "--n", "3"],
    ["arealaw", "--D", "2,4,8", "--workers", "3"],
    ["c2h", "kitaev", "--T", "4,8,16,32"],
    ["c2h", "twoclock", "--d", "3", "--D", "4"],
    ["c2h", "entropy-bound", "--eps", "0.05", "--D", "16"],
]


@acc("A11", "byte-identical JSON on re-run")
def test_A11_determinism(tmp_path):
    for i, args in enumerate(ACCEPTANCE_COMMANDS):
        outs = []
        for rep in range(2):
            p = tmp_path / f"{i}-{rep}.json"
            cli.main(args + ["--out", str(p)])
            outs.append(p.read_bytes())
        assert outs[0] == outs[1], args
    # a fresh interpreter must reproduce the same bytes as well
    p = tmp_path / "fresh.json"
    subprocess.run([sys.executable, "-m", "qexlab", *ACCEPTANCE_COMMANDS[1], "--out", str(p)], check=True)
    assert p.read_bytes() == (tmp_path / "1-0.json").read_bytes()
