"""State-vector simulation of the constant-communication EPR tests.

Alice holds register ``L``, Bob holds ``R``.  Every protocol here is simulated
by carrying the full joint state (ancillas included) through the steps and
projecting the ancillas at the end; acceptance probabilities are exact, not
sampled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expanders, linalg
from .errors import DimensionError, EnsembleError, ParameterError, RegisterNameError
from .expanders import UnitaryEnsemble

VARIANTS = ("basic", "iterated", "shared-randomness", "two-ancilla", "classical")

#: Acceptance probability at or above which a post-measurement state is kept.
_MIN_ACCEPT = 1e-300


@dataclass(frozen=True)
class Resources:
    qubits_sent: int = 0
    cbits_sent: int = 0
    epr_consumed: int = 0
    rbits_used: int = 0

    def as_list(self) -> list:
        return [self.qubits_sent, self.cbits_sent, self.epr_consumed, self.rbits_used]


@dataclass(frozen=True)
class ProtocolTranscript:
    variant: str
    accept_prob: float
    post_state_accept: linalg.RegisteredState | None
    resources: Resources
    D: int
    d: int
    seed: int | None = None
    k: int | None = None
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "variant": self.variant,
            "D": self.D,
            "d": self.d,
            "seed": self.seed,
            "accept_prob": self.accept_prob,
            "resources": dict(zip(("qubits_sent", "cbits_sent", "epr_consumed", "rbits_used"),
                                  self.resources.as_list())),
        }
        if self.k is not None:
            out["k"] = self.k
        out.update(self.extras)
        return out


def ancilla_qubits(d: int) -> int:
    return max(0, math.ceil(math.log2(d))) if d > 1 else 0


def _input_matrix(ensemble: UnitaryEnsemble, state: linalg.RegisteredState) -> np.ndarray:
    if ensemble.d < 1:
        raise EnsembleError("empty ensemble")
    if state.names != ("L", "R"):
        if sorted(state.names) == ["L", "R"]:
            state = state.permute(("L", "R"))
        else:
            raise RegisterNameError(f"protocol input needs registers L, R; got {state.names}")
    if state.dims != (ensemble.D, ensemble.D):
        raise DimensionError(f"registers must both have dimension {ensemble.D}, got {state.dims}")
    return state.tensor()


def _finish(variant, ensemble, accepted, resources, k=None, extras=None):
    p = float(np.vdot(accepted, accepted).real)
    post = None
    if p > _MIN_ACCEPT:
        post = linalg.RegisteredState.normalized((("L", ensemble.D), ("R", ensemble.D)), accepted)
    return ProtocolTranscript(variant, p, post, resources, ensemble.D, ensemble.d, ensemble.seed, k,
                              extras or {})


def _simulate_basic(ensemble: UnitaryEnsemble, x: np.ndarray) -> np.ndarray:
    d = ensemble.d
    u = ensemble.unitaries
    plus = np.full(d, 1 / np.sqrt(d))
    # joint state on (a, L, R)
    joint = np.einsum("i,lr->ilr", plus, x)
    joint = np.einsum("iab,ibr->iar", u, joint)           # Alice: W on (a, L)
    joint = np.einsum("ilc,irc->ilr", joint, u.conj())    # Bob: W* on (a, R)
    return np.einsum("i,ilr->lr", plus.conj(), joint).reshape(-1)


def run_basic(ensemble: UnitaryEnsemble, state: linalg.RegisteredState, variant: str = "basic") -> ProtocolTranscript:
    """One-ancilla test: Alice sends a log2(d)-qubit control register to Bob."""
    x = _input_matrix(ensemble, state)
    accepted = _simulate_basic(ensemble, x)
    return _finish(variant, ensemble, accepted, Resources(qubits_sent=ancilla_qubits(ensemble.d)))


def run_classical(ensemble: UnitaryEnsemble, state: linalg.RegisteredState) -> ProtocolTranscript:
    """Basic test with the ancilla teleported: same statistics, classical resource accounting."""
    q = ancilla_qubits(ensemble.d)
    t = run_basic(ensemble, state)
    return ProtocolTranscript("classical", t.accept_prob, t.post_state_accept,
                              Resources(cbits_sent=2 * q, epr_consumed=q), t.D, t.d, t.seed)


def run_two_ancilla(ensemble: UnitaryEnsemble, state: linalg.RegisteredState) -> ProtocolTranscript:
    """Pre-shared |phi_d> on (a_L, a_R); each side applies its controlled unitary locally."""
    x = _input_matrix(ensemble, state)
    d = ensemble.d
    u = ensemble.unitaries
    phi_d = np.eye(d) / np.sqrt(d)
    joint = np.einsum("ij,lr->ilrj", phi_d, x)              # (a_L, L, R, a_R)
    joint = np.einsum("iab,ibrj->iarj", u, joint)
    joint = np.einsum("ilcj,jrc->ilrj", joint, u.conj())
    accepted = np.einsum("ij,ilrj->lr", phi_d.conj(), joint).reshape(-1)
    res = Resources(qubits_sent=ancilla_qubits(d), epr_consumed=1)
    return _finish("two-ancilla", ensemble, accepted, res)


def _check_margulis_shape(ensemble: UnitaryEnsemble):
    if ensemble.d != 8:
        raise EnsembleError("shared-randomness test needs an 8-member ensemble")
    for r in range(4):
        if np.abs(ensemble.unitaries[r + 4] - ensemble.unitaries[r].conj().T).max() > 1e-12:
            raise EnsembleError(f"member {r + 5} is not the adjoint of member {r + 1}")


def run_shared_randomness(ensemble: UnitaryEnsemble, state: linalg.RegisteredState) -> ProtocolTranscript:
    """Two shared random bits pick r; the basic test then runs on the pair {I, U_r}."""
    _check_margulis_shape(ensemble)
    D = ensemble.D
    probs, posts = [], []
    for r in range(4):
        pair = UnitaryEnsemble(D, 2, np.array([np.eye(D), ensemble.unitaries[r]]))
        t = run_basic(pair, state)
        probs.append(t.accept_prob)
        posts.append(t.post_state_accept)
    p = float(np.mean(probs))
    post = posts[0]
    # the post-accept state is a mixture unless all four branches agree
    if post is None or any(q is None or abs(abs(post.overlap(q)) - 1) > 1e-10 for q in posts[1:]):
        post = None
    return ProtocolTranscript("shared-randomness", p, post, Resources(qubits_sent=1, rbits_used=2), D,
                              ensemble.d, ensemble.seed, extras={"branch_accept_probs": probs})


def run_iterated(ensemble: UnitaryEnsemble, k: int, state: linalg.RegisteredState, cap: int = 512) -> ProtocolTranscript:
    """Basic test on the d^k-member product ensemble, i.e. the k-th power of M."""
    prod = expanders.product_ensemble(ensemble, k, cap=cap)
    x = _input_matrix(ensemble, state)
    accepted = _simulate_basic(prod, x)
    res = Resources(qubits_sent=k * ancilla_qubits(ensemble.d))
    t = _finish("iterated", prod, accepted, res, k=k)
    return ProtocolTranscript("iterated", t.accept_prob, t.post_state_accept, res, ensemble.D, ensemble.d,
                              ensemble.seed, k)


def sample_outcome(transcript: ProtocolTranscript, shots: int = 1, seed=None) -> np.ndarray:
    """Seeded Bernoulli draws of the accept bit; only for transcript realism, the
    exact probability is what every check uses."""
    rng = np.random.default_rng(seed)
    return rng.random(shots) < transcript.accept_prob


def measurement_operator(ensemble: UnitaryEnsemble) -> np.ndarray:
    """Dense M = (1/d) sum_i U_i (x) conj U_i."""
    return expanders.superop_matrix(ensemble)


def effect(ensemble: UnitaryEnsemble) -> np.ndarray:
    """Dense accept effect M^H M of the basic test."""
    m = measurement_operator(ensemble)
    return m.conj().T @ m


def shared_randomness_effect(ensemble: UnitaryEnsemble) -> np.ndarray:
    """(1/4) sum_r M_r^H M_r with M_r = (I + U_r (x) conj U_r) / 2."""
    _check_margulis_shape(ensemble)
    D = ensemble.D
    eye = np.eye(D * D)
    acc = np.zeros((D * D, D * D), dtype=complex)
    for r in range(4):
        u = ensemble.unitaries[r]
        m = (eye + linalg.kron(u, u.conj())) / 2
        acc += m.conj().T @ m
    return acc / 4


def accept_probability_mixed(ensemble: UnitaryEnsemble, rho) -> float:
    """Acceptance probability of the basic test on a density operator over L (x) R."""
    w, v = np.linalg.eigh(np.asarray(rho))
    D = ensemble.D
    total = 0.0
    for p, vec in zip(w, v.T):
        if p > 1e-15:
            total += p * run_basic(ensemble, linalg.RegisteredState.normalized((("L", D), ("R", D)), vec)).accept_prob
    return float(total)


def reject_post_state(ensemble: UnitaryEnsemble, state: linalg.RegisteredState):
    """(I - M^H M)^(1/2)|psi>, normalized; None if rejection has probability 0."""
    x = _input_matrix(ensemble, state).reshape(-1)
    w, v = np.linalg.eigh(effect(ensemble))
    root = (v * np.sqrt(np.clip(1 - w, 0, None))) @ v.conj().T
    out = root @ x
    # sqrt amplifies rounding near w = 1, so decide on the probability itself
    if 1.0 - float((np.abs(v.conj().T @ x) ** 2) @ w) <= 1e-12:
        return None
    D = ensemble.D
    return linalg.RegisteredState.normalized((("L", D), ("R", D)), out)


def worst_orthogonal_state(ensemble: UnitaryEnsemble, mode: str = "auto", seed: int = 0) -> linalg.RegisteredState:
    """Unit vector orthogonal to |phi_D> with the largest acceptance probability."""
    D = ensemble.D
    if D == 1:
        raise DimensionError("no state is orthogonal to |phi_1>")
    phi = expanders.phi_vector(D)

    def neg(v):
        v = v - phi * np.vdot(phi, v)
        w = expanders.apply_superop_adjoint(ensemble, expanders.apply_superop(ensemble, v))
        return -(w - phi * np.vdot(phi, w))

    if mode == "auto":
        mode = "dense" if D * D <= linalg.DENSE_LIMIT else "iterative"
    if mode == "dense":
        return max_orthogonal_accept(effect(ensemble), D)[1]
    else:
        _, v = linalg.hermitian_eigs(neg, k=1, mode="iterative", dim=D * D, seed=seed)
        vec = v[:, 0]
        vec = vec - phi * np.vdot(phi, vec)
    return linalg.RegisteredState.normalized((("L", D), ("R", D)), vec)


def max_orthogonal_accept(effect_matrix, D: int):
    """Largest <psi|E|psi> over unit psi orthogonal to |phi_D>, and the maximizer."""
    phi = expanders.phi_vector(D)
    p = np.eye(D * D) - np.outer(phi, phi.conj())
    # restrict to the complement so phi itself can never be returned
    basis = np.linalg.svd(p)[0][:, : D * D - 1]
    w, v = np.linalg.eigh(basis.conj().T @ np.asarray(effect_matrix) @ basis)
    vec = basis @ v[:, -1]
    return float(w[-1]), linalg.RegisteredState.normalized((("L", D), ("R", D)), vec)


def passing_subspace(ensemble: UnitaryEnsemble, tol: float = 1e-9) -> np.ndarray:
    """Columns spanning the inputs accepted with probability 1 (dense)."""
    w, v = np.linalg.eigh(effect(ensemble))
    return v[:, w >= 1 - tol]


SHARED_RANDOMNESS_EPSILON = (8 + math.sqrt(5)) / 16


def resource_cost(variant: str, epsilon: float, n: int | None = None, C: float | None = None) -> Resources:
    """Closed-form resource counts for reaching soundness error ``epsilon``.

    The o(1) corrections are dropped and every count is rounded up, so these
    are lower-envelope figures, not simulations.  ``n`` is the number of EPR
    pairs tested (``D = 2^n``); it is only needed for the comparison rows
    ``bdsw``, ``bcgst`` and ``hl07``.  ``C`` is the unspecified constant of the
    efficient variants and must be supplied by the caller.
    """
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    L = math.log2(1 / epsilon)

    def need_c():
        if C is None or C <= 0:
            raise ParameterError(f"variant {variant!r} needs a positive constant C")
        return C

    def need_n():
        if n is None or n < 1:
            raise ParameterError(f"variant {variant!r} needs the pair count n >= 1")
        return n

    if variant == "basic":
        return Resources(qubits_sent=math.ceil(2 * L))
    if variant == "efficient":
        return Resources(qubits_sent=math.ceil(need_c() * L))
    if variant == "classical":
        c = math.ceil(8 * L)
        return Resources(cbits_sent=c, epr_consumed=c)
    if variant == "classical-efficient":
        c = math.ceil(4 * need_c() * L)
        return Resources(cbits_sent=c, epr_consumed=c)
    if variant == "shared-randomness":
        return Resources(qubits_sent=1, rbits_used=2)
    if variant == "bdsw":
        k = math.ceil(L)
        return Resources(cbits_sent=need_n() * k, epr_consumed=k)
    if variant == "bcgst":
        nn = need_n()
        k = 1
        while 2 * nn / (k * (2**k + 1)) > epsilon:
            k += 1
        return Resources(cbits_sent=2 * k, epr_consumed=k, rbits_used=math.ceil(nn / k))
    if variant == "hl07":
        return Resources(qubits_sent=math.ceil(L), epr_consumed=math.ceil(need_n() / epsilon))
    raise ParameterError(f"unknown variant {variant!r}")
