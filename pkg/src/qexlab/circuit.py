"""Circuit-to-Hamiltonian constructions.

The clock is a single explicit register with ``T + 1`` levels rather than a
unary chain of qubits.  On legal clock states the two agree, and an explicit
register needs no illegal-clock penalties.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from . import expanders, hamiltonian, linalg
from .arealaw import middle_term
from .errors import DimensionCapError, DimensionError, NonUnitaryError, ParameterError, RegisterNameError
from .expanders import UnitaryEnsemble
from .hamiltonian import HamiltonianSpec, Term


@dataclass(frozen=True)
class Gate:
    support: tuple
    matrix: np.ndarray


@dataclass(frozen=True)
class CircuitSpec:
    """Gates V_1..V_tau on (control, data, scratch qubits), padded with identities to T.

    ``names`` gives the register names for the control qutrit and the data
    register; scratch qubits are named ``q1..qs``.
    """

    data_dim: int
    gates: tuple
    padded_length: int
    control_dim: int = 3
    scratch: int = 0
    names: tuple = ("a", "x")
    clock: str = "k"

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.padded_length < len(self.gates):
            raise ParameterError(f"padded length {self.padded_length} shorter than circuit ({len(self.gates)} gates)")
        if self.padded_length < 1:
            raise ParameterError("padded length must be >= 1")
        regs = dict(self.registers)
        for g in self.gates:
            for n in g.support:
                if n not in regs:
                    raise RegisterNameError(f"gate acts on unknown register {n!r}")
            dim = int(np.prod([regs[n] for n in g.support]))
            m = np.asarray(g.matrix)
            if m.shape != (dim, dim):
                raise DimensionError(f"gate of shape {m.shape} on support of dimension {dim}")
            if not linalg.is_unitary(m):
                raise NonUnitaryError("gate is not unitary")

    @property
    def tau(self) -> int:
        return len(self.gates)

    @property
    def registers(self) -> tuple:
        regs = ((self.names[0], self.control_dim), (self.names[1], self.data_dim))
        return regs + tuple((f"q{i + 1}", 2) for i in range(self.scratch))

    @property
    def comp_dim(self) -> int:
        return int(np.prod([d for _, d in self.registers]))

    def unitary(self, t: int) -> np.ndarray:
        """V_t on the whole computational space; identity for padding steps."""
        if not 1 <= t <= self.padded_length:
            raise ParameterError(f"time step {t} outside 1..{self.padded_length}")
        if t > self.tau:
            return np.eye(self.comp_dim, dtype=complex)
        g = self.gates[t - 1]
        return hamiltonian.embed_operator(g.matrix, g.support, self.registers).toarray()


def controlled_expander_circuit(ensemble: UnitaryEnsemble, T: int, side: str = "left",
                                names=None, clock=None) -> CircuitSpec:
    """One-gate circuit sum_i |i><i| (x) U_i (``side="right"``: U_i^T), padded to T."""
    u = ensemble.unitaries if side == "left" else ensemble.unitaries.transpose(0, 2, 1)
    d = ensemble.d
    w = np.zeros((d * ensemble.D, d * ensemble.D), dtype=complex)
    for i in range(d):
        w[i * ensemble.D:(i + 1) * ensemble.D, i * ensemble.D:(i + 1) * ensemble.D] = u[i]
    suffix = "L" if side == "left" else "R"
    names = names or (f"a{suffix}", suffix)
    return CircuitSpec(ensemble.D, (Gate(names, w),), T, control_dim=d, names=names,
                       clock=clock or f"k{suffix}")


def _clock_op(T: int, a: int, b: int) -> scipy.sparse.csr_matrix:
    return scipy.sparse.csr_matrix(([1.0], ([a], [b])), shape=(T + 1, T + 1))


def build_kitaev(circuit: CircuitSpec, include_init: bool = True) -> HamiltonianSpec:
    """H_prop (+ H_init) for the padded circuit, clock register first."""
    T = circuit.padded_length
    comp = circuit.registers
    regs = ((circuit.clock, T + 1),) + comp
    support = tuple(n for n, _ in regs)
    eye = scipy.sparse.identity(circuit.comp_dim, format="csr")
    terms = []
    for t in range(1, T + 1):
        v = scipy.sparse.csr_matrix(circuit.unitary(t))
        diag = scipy.sparse.kron(_clock_op(T, t - 1, t - 1) + _clock_op(T, t, t), eye)
        hop = scipy.sparse.kron(_clock_op(T, t - 1, t), v.conj().T) + scipy.sparse.kron(_clock_op(T, t, t - 1), v)
        terms.append(Term(f"prop_{t}", support, ((diag - hop) / 2).tocsr(), projector=True))
    if include_init:
        cd = circuit.control_dim
        alpha = np.full(cd, 1 / np.sqrt(cd))
        parts = [(circuit.names[0], np.eye(cd) - np.outer(alpha, alpha))]
        for i in range(circuit.scratch):
            parts.append((f"q{i + 1}", np.diag([0.0, 1.0])))
        init_support = (circuit.clock, circuit.names[0]) + tuple(f"q{i + 1}" for i in range(circuit.scratch))
        sub = tuple((n, d) for n, d in comp if n in init_support)
        inner = sum(hamiltonian.embed_operator(m, (n,), sub) for n, m in parts)
        init = scipy.sparse.kron(_clock_op(T, 0, 0), inner).tocsr()
        terms.append(Term("init", init_support, init, projector=circuit.scratch == 0))
    return HamiltonianSpec(regs, tuple(terms))


@dataclass(frozen=True)
class HistoryState:
    state: linalg.RegisteredState
    tau: int
    T: int
    final: np.ndarray = field(repr=False)  # V_tau ... V_1 applied to the input

    @property
    def epsilon(self) -> float:
        return self.tau / self.T

    def padding_weight(self) -> float:
        """|<Phi_x (x) w|Psi_x>|^2 with w the uniform clock state on steps tau..T."""
        w = np.zeros(self.T + 1)
        w[self.tau:] = 1
        w /= np.linalg.norm(w)
        target = np.kron(w, self.final)
        return float(abs(np.vdot(target, self.state.amplitudes)) ** 2)


def initial_vector(circuit: CircuitSpec, x) -> np.ndarray:
    """(1/sqrt c) sum_i |i>_a (x) |x>_data (x) |0...0>_scratch."""
    cd = circuit.control_dim
    if np.ndim(x) == 0:
        data = np.zeros(circuit.data_dim, dtype=complex)
        data[int(x)] = 1.0
    else:
        data = np.asarray(x, dtype=complex)
        data = data / np.linalg.norm(data)
    scratch = np.zeros(2**circuit.scratch)
    scratch[0] = 1.0
    return np.kron(np.kron(np.full(cd, 1 / np.sqrt(cd)), data), scratch)


def build_history_state(circuit: CircuitSpec, x=0) -> HistoryState:
    """(T+1)^(-1/2) sum_t |t> (x) V_t ... V_1 |init(x)>."""
    T = circuit.padded_length
    v = initial_vector(circuit, x)
    slices = [v]
    for t in range(1, T + 1):
        v = circuit.unitary(t) @ v if t <= circuit.tau else v
        slices.append(v)
    amps = np.concatenate(slices) / np.sqrt(T + 1)
    regs = ((circuit.clock, T + 1),) + circuit.registers
    final = slices[circuit.tau]
    return HistoryState(linalg.RegisteredState.normalized(regs, amps), circuit.tau, T, final)


def kitaev_gap(T: int, D: int = 1, mode: str = "auto") -> dict:
    """Ground energy and gap of the Kitaev Hamiltonian of the padded identity circuit."""
    ens = expanders.identity_ensemble(D, 3)
    spec = build_kitaev(controlled_expander_circuit(ens, T, names=("a", "x"), clock="k"))
    w, _ = hamiltonian.spectrum(spec, k=2, mode=mode)
    return {"T": int(T), "E0": float(w[0]), "gap": float(w[1] - w[0])}


def gap_slope(rows) -> float:
    """Least-squares slope of log(gap) against log(T)."""
    return float(np.polyfit(np.log([r["T"] for r in rows]), np.log([r["gap"] for r in rows]), 1)[0])


def kitaev_gap_scan(Ts, D: int = 1, mode: str = "auto"):
    rows = [kitaev_gap(T, D, mode) for T in Ts]
    return rows, gap_slope(rows)


# -- two copies with the middle bridge ------------------------------------------------

HPRIME_CUT = (("kL", "aL", "L"), ("kR", "aR", "R"))


def build_hprime_lmr(ensemble: UnitaryEnsemble, T: int, rescale: bool = True) -> HamiltonianSpec:
    """T^2-rescaled Kitaev copies of the left and right terms, joined by the middle term.

    Registers ``(kL, aL, L, kR, aR, R)``.  The right copy runs U_i^T so that
    its padded output matches the right-hand ground space of the
    four-particle chain.
    """
    if ensemble.d != 3 or not ensemble.has_identity_first:
        raise ParameterError("needs a d = 3 ensemble with U_1 = I")
    dim = ((T + 1) * 3 * ensemble.D) ** 2
    if dim > hamiltonian.MAX_DIM:
        raise DimensionCapError(f"H'_LMR dimension {dim} exceeds cap")
    left = build_kitaev(controlled_expander_circuit(ensemble, T, "left"))
    right = build_kitaev(controlled_expander_circuit(ensemble, T, "right"))
    left = _prefixed(left, "L")
    right = _prefixed(right, "R")
    if rescale:
        left = hamiltonian.rescale_terms(left, float(T) ** 2)
        right = hamiltonian.rescale_terms(right, float(T) ** 2)
    return left.combine(right, extra_terms=(Term("H_M", ("aL", "aR"), middle_term(), projector=True),))


def _prefixed(spec: HamiltonianSpec, side: str) -> HamiltonianSpec:
    terms = tuple(Term(f"{t.name}_{side}", t.support, t.matrix, t.scale, t.projector) for t in spec.terms)
    return HamiltonianSpec(spec.registers, terms)


def hprime_reference_state(ensemble: UnitaryEnsemble, T: int) -> linalg.RegisteredState:
    """|G> (x) |w> (x) |w>: the four-particle ground state with padded clocks attached."""
    D = ensemble.D
    u = ensemble.unitaries
    w = np.zeros(T + 1)
    w[1:] = 1 / np.sqrt(T)
    # amplitude(kL, aL, L, kR, aR, R) = w[kL] w[kR] (U_i U_j)[L, R] / (3 sqrt D)
    g = np.einsum("iab,jbc->iajc", u, u) / (3 * np.sqrt(D))
    amps = np.einsum("k,iajc,m->kiamjc", w, g, w)
    regs = (("kL", T + 1), ("aL", 3), ("L", D), ("kR", T + 1), ("aR", 3), ("R", D))
    return linalg.RegisteredState.normalized(regs, amps)


#: Fraction of log2 D the ground-state entropy of H' must reach at T >= 7.
ENTROPY_FRACTION = 0.9


def certify_hprime(ensemble: UnitaryEnsemble, T: int, report: expanders.ExpanderReport | None = None,
                   mode: str = "auto") -> hamiltonian.SpectralReport:
    """Dense or iterative certificate for H'_LMR.

    Flags: unique ground state, gap >= (1 - lambda) / 8, ground energy <= 2 tau / T
    and entropy across the middle cut >= 0.9 log2 D.
    """
    circuit_tau = 1
    spec = build_hprime_lmr(ensemble, T)
    if report is None:
        report = expanders.expander_lambda(ensemble)
    rep = hamiltonian.certify(spec, k=3, gap_bound=0.5 * report.c / 4, cut=HPRIME_CUT, mode=mode)
    ref = hprime_reference_state(ensemble, T)
    rep.extras.update({
        "lambda": report.lambda_, "c": report.c, "D": ensemble.D, "T": T,
        "ground_energy_bound": 2.0 * circuit_tau / T,
        "entropy_bound": ENTROPY_FRACTION * math.log2(ensemble.D),
        "overlap_with_reference": float(abs(ref.overlap(rep.ground_state))),
    })
    # H' is not frustration-free, so that flag is dropped in favour of the energy bound
    rep.certified.pop("frustration_free", None)
    rep.certified["low_ground_energy"] = bool(rep.ground_energy <= 2.0 * circuit_tau / T + 1e-9)
    rep.certified["entropy_at_least"] = bool(rep.extras.get("entropy", 0.0) >= ENTROPY_FRACTION * math.log2(ensemble.D))
    return rep


# -- entropy lower bound from fidelity ---------------------------------------------------

@dataclass(frozen=True)
class EntropyBound:
    fidelity_deficit: float
    D: int
    kappa: float
    bound_bits: float


def _bound_value(eps, D, s):
    # s = 1 - kappa^(-1/2); tail weight beyond the kappa/D threshold is at least 1 - eps/s
    return (1.0 - eps / s) * (math.log2(D) + 2.0 * math.log2(1.0 - s))


def entropy_lower_bound(eps: float, D: int, grid: int = 256, tol: float = 1e-10) -> EntropyBound:
    """Lower bound on the entanglement entropy of any state whose overlap with a
    D-dimensional maximally entangled state is at least 1 - eps.

    Maximizes (1 - eps / (1 - kappa^(-1/2))) log2(D / kappa) over kappa in
    (1, D] by a logarithmic grid scan followed by golden-section refinement.
    """
    if not 0 <= eps <= 1:
        raise ParameterError(f"fidelity deficit must lie in [0, 1], got {eps}")
    if D < 2:
        raise ParameterError("D must be >= 2")
    if eps == 0:
        return EntropyBound(0.0, D, 1.0, math.log2(D))
    s_max = 1.0 - D**-0.5
    lo = min(eps, s_max) * 1e-3
    grid_s = np.geomspace(lo, s_max, grid)
    vals = np.array([_bound_value(eps, D, s) for s in grid_s])
    i = int(np.argmax(vals))
    a = grid_s[max(i - 1, 0)]
    b = grid_s[min(i + 1, grid - 1)]
    g = (math.sqrt(5) - 1) / 2
    c1, c2 = b - g * (b - a), a + g * (b - a)
    f1, f2 = _bound_value(eps, D, c1), _bound_value(eps, D, c2)
    while b - a > 1e-14 and abs(f1 - f2) > tol * 1e-2:
        if f1 < f2:
            a, c1, f1 = c1, c2, f2
            c2 = a + g * (b - a)
            f2 = _bound_value(eps, D, c2)
        else:
            b, c2, f2 = c2, c1, f1
            c1 = b - g * (b - a)
            f1 = _bound_value(eps, D, c1)
    best_s, best = max([(grid_s[i], vals[i]), (c1, f1), (c2, f2)], key=lambda p: p[1])
    kappa = (1.0 - best_s) ** -2
    return EntropyBound(float(eps), int(D), float(kappa), float(min(max(best, 0.0), math.log2(D))))


# -- two-clock Hamiltonian -----------------------------------------------------------------

TWO_CLOCK_CUT = (("AL", "L"), ("R", "AR"))


def _w_operator(ensemble: UnitaryEnsemble, conj: bool) -> np.ndarray:
    d, D = ensemble.d, ensemble.D
    u = ensemble.unitaries.conj() if conj else ensemble.unitaries
    w = np.zeros((d * D, d * D), dtype=complex)
    for i in range(d):
        w[i * D:(i + 1) * D, i * D:(i + 1) * D] = u[i]
    return w


def two_clock_middle(d: int) -> np.ndarray:
    """On A_L (x) A_R with A = clock (x) ancilla: penalize equal clocks unless the
    ancillas are in |phi_d>."""
    phi = np.eye(d).reshape(-1) / np.sqrt(d)
    anc = np.eye(d * d) - np.outer(phi, phi)
    h = np.zeros((4 * d * d, 4 * d * d))
    for s in (0, 1):
        proj = np.zeros((2, 2))
        proj[s, s] = 1
        # order (C_L, a_L, C_R, a_R) -> build as (C_L, C_R, a_L, a_R) then permute
        block = np.kron(np.kron(proj, proj), anc)
        t = block.reshape(2, 2, d, d, 2, 2, d, d).transpose(0, 2, 1, 3, 4, 6, 5, 7)
        h += t.reshape(4 * d * d, 4 * d * d)
    return h


def two_clock_side(ensemble: UnitaryEnsemble, conj: bool) -> np.ndarray:
    """(1/2)[I - |1><0| (x) W - |0><1| (x) W^H] on (clock, ancilla, data)."""
    w = _w_operator(ensemble, conj)
    n = w.shape[0]
    up = np.array([[0.0, 0.0], [1.0, 0.0]])
    return (np.eye(2 * n) - np.kron(up, w) - np.kron(up.T, w.conj().T)) / 2


def build_two_clock(ensemble: UnitaryEnsemble):
    """Hamiltonian on (A_L, L, R, A_R) and its history ground state."""
    d, D = ensemble.d, ensemble.D
    if (2 * d * D) ** 2 > linalg.DENSE_LIMIT * 64:
        raise DimensionCapError(f"two-clock dimension {(2 * d * D) ** 2} too large")
    regs = (("AL", 2 * d), ("L", D), ("R", D), ("AR", 2 * d))
    spec = HamiltonianSpec(regs, (
        Term("H_M", ("AL", "AR"), two_clock_middle(d), projector=True),
        Term("H_L", ("AL", "L"), two_clock_side(ensemble, conj=False), projector=True),
        Term("H_R", ("AR", "R"), two_clock_side(ensemble, conj=True), projector=True),
    ))
    return spec, two_clock_history_state(ensemble)


def two_clock_history_state(ensemble: UnitaryEnsemble) -> linalg.RegisteredState:
    """(1/(2 sqrt d)) sum_i (|0,i> + W|1,i>)_{A_L,L} (|0,i> + W*|1,i>)_{A_R,R} |phi_D>."""
    d, D = ensemble.d, ensemble.D
    u = ensemble.unitaries
    eye = np.eye(D)
    t = np.zeros((2, d, D, D, 2, d), dtype=complex)
    for i in range(d):
        lefts = (eye, u[i])
        rights = (eye, u[i].conj())
        for s in (0, 1):
            for sp in (0, 1):
                # (A (x) B)|phi_D> has matrix form A B^T / sqrt D
                t[s, i, :, :, sp, i] = lefts[s] @ rights[sp].T / np.sqrt(D)
    amps = t.reshape(-1) / (2 * np.sqrt(d))
    return linalg.RegisteredState.normalized((("AL", 2 * d), ("L", D), ("R", D), ("AR", 2 * d)), amps)


def certify_two_clock(ensemble: UnitaryEnsemble, mode: str = "auto") -> hamiltonian.SpectralReport:
    spec, psi = build_two_clock(ensemble)
    rep = hamiltonian.certify(spec, k=3, cut=TWO_CLOCK_CUT, mode=mode)
    sd = linalg.schmidt(psi, TWO_CLOCK_CUT)
    weights = sd.coefficients**2
    nz = weights[weights > linalg.SCHMIDT_CUTOFF]
    dD = ensemble.d * ensemble.D
    rep.extras.update({
        "d": ensemble.d, "D": ensemble.D,
        "history_residual": spec.residual(psi),
        "overlap_deficit": float(1.0 - abs(psi.overlap(rep.ground_state)) ** 2),
        "schmidt_rank": int(nz.size),
        "schmidt_spread": float(nz.max() - nz.min()),
        "history_entropy": linalg.entropy_from_weights(weights),
        "expected_entropy": math.log2(dD),
    })
    rep.certified["history_is_ground"] = bool(rep.extras["overlap_deficit"] <= 1e-8)
    rep.certified["uniform_schmidt"] = bool(nz.size == dD and rep.extras["schmidt_spread"] <= 1e-10)
    return rep


def circuit_to_json(circuit: CircuitSpec) -> dict:
    """JSON document: register dims, gates as sparse complex triplets with supports, padded length."""
    gates = []
    for g in circuit.gates:
        coo = scipy.sparse.coo_matrix(np.asarray(g.matrix))
        gates.append({
            "support": list(g.support),
            "entries": [[int(r), int(c), float(v.real), float(v.imag)] for r, c, v in zip(coo.row, coo.col, coo.data)],
        })
    return {
        "registers": {"control": circuit.control_dim, "data": circuit.data_dim, "scratch": circuit.scratch},
        "names": list(circuit.names),
        "clock": circuit.clock,
        "gates": gates,
        "padded_length": circuit.padded_length,
    }


def circuit_from_json(doc) -> CircuitSpec:
    from .serialize import validate

    if isinstance(doc, str):
        doc = json.loads(doc)
    validate(doc, "circuit")
    try:
        regs = doc["registers"]
        names = tuple(doc.get("names", ("a", "x")))
        dims = {names[0]: int(regs.get("control", 3)), names[1]: int(regs["data"])}
        for i in range(int(regs.get("scratch", 0))):
            dims[f"q{i + 1}"] = 2
        gates = []
        for g in doc["gates"]:
            support = tuple(g["support"])
            n = int(np.prod([dims[s] for s in support]))
            m = np.zeros((n, n), dtype=complex)
            for r, c, re, im in g["entries"]:
                m[int(r), int(c)] += complex(re, im)
            gates.append(Gate(support, m))
        return CircuitSpec(int(regs["data"]), tuple(gates), int(doc["padded_length"]),
                           control_dim=int(regs.get("control", 3)), scratch=int(regs.get("scratch", 0)),
                           names=names, clock=doc.get("clock", "k"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, (DimensionError, NonUnitaryError, ParameterError, RegisterNameError)):
            raise
        raise ParameterError(f"malformed circuit document: {exc}") from exc
