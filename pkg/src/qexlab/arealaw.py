"""Four-particle chain Sigma_L - sigma_1 - sigma_2 - Sigma_R with a highly entangled, gapped ground state.

Registers are ordered ``(SL, s1, s2, SR)`` with dimensions ``(D, 3, 3, D)``;
the middle cut separates ``(SL, s1)`` from ``(s2, SR)``.  Qutrit levels
1, 2, 3 are stored at indices 0, 1, 2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expanders, hamiltonian, linalg
from .errors import EnsembleError, ProjectorError, RegisterNameError
from .expanders import UnitaryEnsemble
from .hamiltonian import HamiltonianSpec, Term

REGISTERS = ("SL", "s1", "s2", "SR")
MIDDLE_CUT = (("SL", "s1"), ("s2", "SR"))


def _check_ensemble(ensemble: UnitaryEnsemble):
    if ensemble.d != 3:
        raise EnsembleError(f"four-particle construction needs d = 3, got d = {ensemble.d}")
    if not ensemble.has_identity_first:
        raise EnsembleError("four-particle construction needs U_1 = I exactly")


def _ket(i, n=3):
    v = np.zeros(n)
    v[i] = 1.0
    return v


def middle_term() -> np.ndarray:
    """Projector onto the antisymmetric (1,2) and (1,3) qutrit pairs."""
    h = np.zeros((9, 9))
    for j in (1, 2):
        v = np.kron(_ket(0), _ket(j)) - np.kron(_ket(j), _ket(0))
        h += np.outer(v, v) / 2
    return h


def left_term(ensemble: UnitaryEnsemble) -> np.ndarray:
    """I - (1/3) sum U_i U_i'^H (x) |i><i'| on (SL, s1)."""
    u = ensemble.unitaries
    D = ensemble.D
    proj = np.zeros((3 * D, 3 * D), dtype=complex)
    for i in range(3):
        for ip in range(3):
            proj += np.kron(u[i] @ u[ip].conj().T, np.outer(_ket(i), _ket(ip)))
    return np.eye(3 * D) - proj / 3


def right_term(ensemble: UnitaryEnsemble) -> np.ndarray:
    """I - (1/3) sum |j><j'| (x) (U_j'^H U_j)^T on (s2, SR).

    This is the projector onto span{sum_j |j> (x) U_j^T |y>}, the subspace
    where block column j equals block column 1 times U_j.
    """
    u = ensemble.unitaries
    D = ensemble.D
    proj = np.zeros((3 * D, 3 * D), dtype=complex)
    for j in range(3):
        for jp in range(3):
            proj += np.kron(np.outer(_ket(j), _ket(jp)), (u[jp].conj().T @ u[j]).T)
    return np.eye(3 * D) - proj / 3


def build_h4(ensemble: UnitaryEnsemble) -> HamiltonianSpec:
    _check_ensemble(ensemble)
    D = ensemble.D
    return HamiltonianSpec(
        (("SL", D), ("s1", 3), ("s2", 3), ("SR", D)),
        (
            Term("H_L", ("SL", "s1"), left_term(ensemble), projector=True),
            Term("H_M", ("s1", "s2"), middle_term(), projector=True),
            Term("H_R", ("s2", "SR"), right_term(ensemble), projector=True),
        ),
    )


@dataclass(frozen=True)
class BlockMatrixState:
    """3 x 3 array of D x D blocks psi_ij: amplitude(l, i, j, r) = psi_ij[l, r]."""

    blocks: np.ndarray  # shape (3, 3, D, D)

    @property
    def D(self) -> int:
        return self.blocks.shape[-1]

    @classmethod
    def from_state(cls, state: linalg.RegisteredState) -> "BlockMatrixState":
        if state.names != REGISTERS:
            raise RegisterNameError(f"expected registers {REGISTERS}, got {state.names}")
        if state.dims[1:3] != (3, 3) or state.dims[0] != state.dims[3]:
            raise RegisterNameError(f"register dims {state.dims} do not match (D, 3, 3, D)")
        return cls(state.tensor().transpose(1, 2, 0, 3).copy())

    def to_state(self) -> linalg.RegisteredState:
        D = self.D
        amps = self.blocks.transpose(2, 0, 1, 3).reshape(-1)
        return linalg.RegisteredState((("SL", D), ("s1", 3), ("s2", 3), ("SR", D)), amps)

    def matrix(self) -> np.ndarray:
        """The 3D x 3D matrix Z with row index (i, l) and column index (j, r)."""
        D = self.D
        return self.blocks.transpose(0, 2, 1, 3).reshape(3 * D, 3 * D)


def analytic_ground_state(ensemble: UnitaryEnsemble) -> linalg.RegisteredState:
    """Blocks U_i U_j / (3 sqrt D) with U_1 = I."""
    _check_ensemble(ensemble)
    u = ensemble.unitaries
    blocks = np.einsum("iab,jbc->ijac", u, u) / (3 * np.sqrt(ensemble.D))
    return BlockMatrixState(blocks).to_state()


def certify_h4(ensemble: UnitaryEnsemble, report: expanders.ExpanderReport | None = None,
               mode: str = "auto", k: int = 3) -> hamiltonian.SpectralReport:
    """Spectral certificate with the gap checked against (1 - lambda) / 4.

    Works on any d = 3 ensemble with U_1 = I, including non-expanding ones;
    for those the uniqueness and gap flags simply come out false.
    """
    spec = build_h4(ensemble)
    if report is None:
        report = expanders.expander_lambda(ensemble)
    rep = hamiltonian.certify(spec, k=k, gap_bound=report.c / 4, cut=MIDDLE_CUT, mode=mode)
    rep.extras.update({"lambda": report.lambda_, "c": report.c, "D": ensemble.D})
    return rep


@dataclass(frozen=True)
class TwoProjectorResult:
    mu: float
    min_eig: float
    predicted: float


def _check_projector(p, name):
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ProjectorError(f"{name} is not square")
    if np.abs(p - p.conj().T).max() > 1e-10 or np.abs(p @ p - p).max() > hamiltonian.PROJECTOR_TOL:
        raise ProjectorError(f"{name} is not an orthogonal projector")
    return p


def min_eig_two_projectors(p1, p2) -> TwoProjectorResult:
    """Smallest eigenvalue of I - P1 + P2 next to its closed form 1 - sqrt(1 - mu)."""
    p1 = _check_projector(p1, "P1")
    p2 = _check_projector(p2, "P2")
    if p1.shape != p2.shape:
        raise ProjectorError("P1 and P2 act on different spaces")
    w, v = np.linalg.eigh(p1)
    q = v[:, w > 0.5]
    if q.shape[1] == 0:
        raise ProjectorError("P1 must be nonzero")
    w2, v2 = np.linalg.eigh(p2)
    comp = v2[:, w2 < 0.5]
    # sqrt(1 - mu) is the largest principal sine, read off directly so that
    # mu close to 1 does not lose half the digits through the square root
    sine = float(np.linalg.norm(comp.conj().T @ q, 2)) if comp.shape[1] else 0.0
    sine = min(sine, 1.0)
    n = p1.shape[0]
    min_eig = float(np.linalg.eigvalsh(np.eye(n) - p1 + p2)[0])
    return TwoProjectorResult(1.0 - sine**2, min_eig, 1.0 - sine)


@dataclass(frozen=True)
class QexpCheck:
    trials: int
    lambda_: float
    c: float
    max_contraction: float
    min_deviation_sum: float
    contraction_violations: int
    deviation_violations: int

    @property
    def ok(self) -> bool:
        return self.contraction_violations == 0 and self.deviation_violations == 0


def random_traceless(D: int, rng) -> np.ndarray:
    x = rng.standard_normal((D, D)) + 1j * rng.standard_normal((D, D))
    x -= np.trace(x) / D * np.eye(D)
    return x / np.linalg.norm(x)


def verify_qexp_inequalities(ensemble: UnitaryEnsemble, trials: int = 200, seed: int = 0,
                             report: expanders.ExpanderReport | None = None, samples=None) -> QexpCheck:
    """Check the contraction bound and its triangle-inequality consequence on test matrices.

    For unit-norm traceless X: |X + U2 X U2^H + U3 X U3^H| / 3 <= 1 - c and
    |U2 X U2^H - X| + |U3 X U3^H - X| >= 3c, with c = 1 - lambda measured.
    """
    _check_ensemble(ensemble)
    if report is None:
        report = expanders.expander_lambda(ensemble)
    c = report.c
    D = ensemble.D
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = [random_traceless(D, rng) for _ in range(trials)] if D > 1 else []
    u = ensemble.unitaries
    max_con, min_dev = 0.0, np.inf
    bad1 = bad2 = 0
    for x in samples:
        con = np.linalg.norm(expanders.channel(ensemble, x))
        dev = sum(np.linalg.norm(u[i] @ x @ u[i].conj().T - x) for i in (1, 2))
        max_con = max(max_con, con)
        min_dev = min(min_dev, dev)
        bad1 += con > (1 - c) + 1e-9
        bad2 += dev < 3 * c - 1e-9
    return QexpCheck(len(samples), report.lambda_, c, float(max_con), float(min_dev), int(bad1), int(bad2))


def lr_ground_state(ensemble: UnitaryEnsemble, x) -> linalg.RegisteredState:
    """State with blocks U_i X U_j: the general element of the H_L + H_R ground space."""
    _check_ensemble(ensemble)
    u = ensemble.unitaries
    blocks = np.einsum("iab,bc,jcd->ijad", u, np.asarray(x), u)
    return linalg.RegisteredState.normalized((("SL", ensemble.D), ("s1", 3), ("s2", 3), ("SR", ensemble.D)),
                                             blocks.transpose(2, 0, 1, 3))


def middle_energy(ensemble: UnitaryEnsemble, x) -> dict:
    """<psi|H_M|psi> on the normalized blocks-U_i X U_j state, beside two closed forms.

    ``squared`` is (|X U2 - U2 X|^2 + |X U3 - U3 X|^2) / 2 and ``unsquared``
    drops the squares; both use X rescaled so the state is normalized.
    """
    state = lr_ground_state(ensemble, x)
    spec = build_h4(ensemble)
    xn = BlockMatrixState.from_state(state).blocks[0, 0]
    u = ensemble.unitaries
    comms = [np.linalg.norm(xn @ u[i] - u[i] @ xn) for i in (1, 2)]
    return {
        "exact": float(np.vdot(state.amplitudes, spec.embedded("H_M") @ state.amplitudes).real),
        "squared": float(sum(c**2 for c in comms) / 2),
        "unsquared": float(sum(comms) / 2),
    }
