import numpy as np
import pytest

from qexlab import hamiltonian
from qexlab.errors import DimensionCapError, DimensionError, ProjectorError, RegisterNameError
from qexlab.hamiltonian import HamiltonianSpec, Term

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def test_embed_matches_explicit_kron():
    regs = (("a", 2), ("b", 3), ("c", 2))
    rng = np.random.default_rng(0)
    op = rng.standard_normal((4, 4))
    # op on (c, a): explicit version via index bookkeeping
    full = hamiltonian.embed_operator(op, ("c", "a"), regs).toarray()
    # op[(c', a'), (c, a)] placed on amplitude order (a, b, c)
    ref = np.einsum("qpca,Bb->pBqabc", op.reshape(2, 2, 2, 2), np.eye(3)).reshape(12, 12)
    assert np.allclose(full, ref)


def test_spec_validation():
    regs = (("a", 2), ("b", 2))
    with pytest.raises(RegisterNameError):
        HamiltonianSpec(regs, (Term("t", ("z",), Z),))
    with pytest.raises(ValueError):
        HamiltonianSpec(regs, (Term("t", ("a",), np.array([[0, 1], [0, 0]])),))
    with pytest.raises(ProjectorError):
        HamiltonianSpec(regs, (Term("t", ("a",), Z, projector=True),))
    with pytest.raises(DimensionError):
        HamiltonianSpec(regs, (Term("t", ("a", "b"), Z),)).sparse
    with pytest.raises(DimensionCapError):
        HamiltonianSpec((("a", 2048), ("b", 1024)))


def ising(n=4):
    regs = tuple((f"q{i}", 2) for i in range(n))
    terms = [Term(f"zz{i}", (f"q{i}", f"q{i + 1}"), np.kron(Z, Z)) for i in range(n - 1)]
    terms += [Term(f"x{i}", (f"q{i}",), 0.7 * X) for i in range(n)]
    return HamiltonianSpec(regs, tuple(terms))


def test_sparse_matches_dense_sum_and_matvec():
    spec = ising()
    h = spec.to_dense()
    assert np.allclose(h, h.conj().T)
    v = np.random.default_rng(1).standard_normal(16)
    assert np.allclose(spec.matvec(v), h @ v)
    assert spec.norm_bound() >= np.linalg.norm(h, 2) - 1e-12


def test_rescale_is_linear():
    spec = ising()
    w1, v1 = hamiltonian.spectrum(spec, k=4)
    w0, _ = hamiltonian.spectrum(hamiltonian.rescale_terms(spec, 1.0), k=4)
    assert np.array_equal(w0, w1)
    w3, v3 = hamiltonian.spectrum(hamiltonian.rescale_terms(spec, 3.5), k=4)
    assert np.allclose(w3, 3.5 * w1, rtol=1e-12, atol=1e-12)
    assert abs(abs(np.vdot(v1[:, 0], v3[:, 0])) - 1) <= 1e-10
    with pytest.raises(ValueError):
        hamiltonian.rescale_terms(spec, 0)


def test_certify_flags_and_entropy():
    # two-qubit singlet as unique ground state of the Heisenberg exchange
    y = np.array([[0, -1j], [1j, 0]])
    heis = np.kron(X, X) + np.kron(y, y) + np.kron(Z, Z) + 3 * np.eye(4)
    spec = HamiltonianSpec((("a", 2), ("b", 2)), (Term("J", ("a", "b"), heis),))
    rep = hamiltonian.certify(spec, k=2, gap_bound=4.0, cut=(["a"], ["b"]))
    assert rep.certified == {"frustration_free": True, "unique_ground": True, "gap_at_least": True}
    assert rep.extras["entropy"] == pytest.approx(1.0, abs=1e-12)
    assert rep.ground_degeneracy == 1
    d = rep.as_dict()
    assert d["gap"] == pytest.approx(4.0) and "entropy" in d


def test_degeneracy_tolerance():
    spec = HamiltonianSpec((("a", 3),), (Term("h", ("a",), np.diag([0.0, 1e-12, 1.0])),))
    rep = hamiltonian.certify(spec, k=3)
    assert rep.ground_degeneracy == 2 and not rep.certified["unique_ground"]


def test_triplets_csv():
    spec = HamiltonianSpec((("a", 2),), (Term("x", ("a",), X),))
    lines = spec.triplets_csv("x").splitlines()
    assert lines[0] == "row,col,re,im"
    assert lines[1:] == ["0,1,1.0,0.0", "1,0,1.0,0.0"]


def test_iterative_certify_matches_dense():
    spec = ising(6)
    a = hamiltonian.certify(spec, k=3, mode="dense")
    b = hamiltonian.certify(spec, k=3, mode="iterative")
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-8)

