"""Unitary ensembles and the expander superoperator.

For an ensemble ``U_1..U_d`` on ``C^D`` the conjugation channel is
``E(X) = (1/d) sum_i U_i X U_i^H``.  Under row-major vectorization the same
map is ``(1/d) sum_i U_i (x) conj(U_i)`` acting on ``C^D (x) C^D``, so the
maximally entangled state is the vectorized identity and is always fixed.
Nothing here ever builds a ``D^2 x D^2`` matrix unless asked to.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import CertificationError, DimensionCapError, DimensionError, EnsembleError

KINDS = ("haar", "haar-with-identity", "margulis", "explicit", "product")


@dataclass(frozen=True)
class UnitaryEnsemble:
    D: int
    d: int
    unitaries: np.ndarray  # shape (d, D, D)
    kind: str = "explicit"
    seed: int | None = None

    def __post_init__(self):
        u = np.asarray(self.unitaries, dtype=complex)
        if u.ndim != 3 or u.shape[1:] != (self.D, self.D) or u.shape[0] != self.d:
            raise DimensionError(f"expected {self.d} unitaries of shape {(self.D, self.D)}, got {u.shape}")
        if self.d < 1:
            raise EnsembleError("ensemble must contain at least one unitary")
        for i, ui in enumerate(u):
            if not linalg.is_unitary(ui):
                raise EnsembleError(f"member {i + 1} is not unitary")
        u = u.copy()
        u.flags.writeable = False
        object.__setattr__(self, "unitaries", u)

    def __eq__(self, other):
        return (
            isinstance(other, UnitaryEnsemble)
            and (self.D, self.d, self.kind, self.seed) == (other.D, other.d, other.kind, other.seed)
            and np.array_equal(self.unitaries, other.unitaries)
        )

    __hash__ = None

    def __len__(self):
        return self.d

    @property
    def has_identity_first(self) -> bool:
        return bool(np.array_equal(self.unitaries[0], np.eye(self.D)))

    def subset(self, indices, kind="explicit") -> "UnitaryEnsemble":
        return UnitaryEnsemble(self.D, len(indices), self.unitaries[list(indices)], kind=kind, seed=self.seed)


def _shear(n: int, a: int, b: int, c: int, e: int, shift) -> np.ndarray:
    """Permutation |x,y> -> |a x + b y + s0, c x + e y + s1> on Z_n x Z_n."""
    D = n * n
    p = np.zeros((D, D))
    for x in range(n):
        for y in range(n):
            x2 = (a * x + b * y + shift[0]) % n
            y2 = (c * x + e * y + shift[1]) % n
            p[x2 * n + y2, x * n + y] = 1.0
    return p


def dft(D: int) -> np.ndarray:
    k = np.arange(D)
    return np.exp(2j * np.pi * np.outer(k, k) / D) / np.sqrt(D)


def margulis_unitaries(n: int) -> np.ndarray:
    """Eight unitaries on C^(n^2): four base members followed by their adjoints.

    Base members are the affine shears |x,y> -> |x+y+1, y> and
    |x,y> -> |x, y+x+1> and their conjugates by the D-point Fourier transform.
    The purely linear shears both fix |0,0>, and the Fourier transform sends
    |0,0><0,0| to the uniform projector, which every permutation fixes; the
    unit offsets are what remove that common invariant.
    """
    if n < 2:
        raise DimensionError("margulis ensemble needs n >= 2")
    s1 = _shear(n, 1, 1, 0, 1, (1, 0))
    s2 = _shear(n, 1, 0, 1, 1, (0, 1))
    f = dft(n * n)
    base = [s1, s2, f @ s1 @ f.conj().T, f @ s2 @ f.conj().T]
    return np.array(base + [u.conj().T for u in base])


def _child_rngs(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def build_ensemble(kind: str, D: int, d: int, seed: int | None = None, unitaries=None) -> UnitaryEnsemble:
    """Construct an ensemble.

    kind
        ``haar`` draws ``d`` independent Haar unitaries; ``haar-with-identity``
        fixes ``U_1 = I`` and draws the other ``d - 1``; ``margulis`` needs
        ``D = n^2`` and ``d = 8``; ``explicit`` wraps ``unitaries``.
    """
    if kind == "haar":
        if d < 2:
            raise EnsembleError("haar ensembles need d >= 2")
        us = [linalg.haar_unitary(D, rng=r) for r in _child_rngs(seed, d)]
    elif kind == "haar-with-identity":
        if d < 2:
            raise EnsembleError("haar-with-identity ensembles need d >= 2")
        us = [np.eye(D, dtype=complex)] + [linalg.haar_unitary(D, rng=r) for r in _child_rngs(seed, d - 1)]
    elif kind == "margulis":
        n = math.isqrt(D)
        if n * n != D or n < 2:
            raise DimensionError(f"margulis ensemble needs D = n^2 with n >= 2, got D={D}")
        if d != 8:
            raise EnsembleError("margulis ensemble has exactly d = 8 members")
        us = margulis_unitaries(n)
        seed = None
    elif kind == "explicit":
        if unitaries is None:
            raise EnsembleError("explicit ensembles need their unitaries")
        us = np.asarray(unitaries, dtype=complex)
    else:
        raise EnsembleError(f"unknown ensemble kind {kind!r}")
    if D < 1:
        raise DimensionError("D must be >= 1")
    return UnitaryEnsemble(D, d, np.asarray(us, dtype=complex), kind=kind, seed=seed)


def identity_ensemble(D: int, d: int = 3) -> UnitaryEnsemble:
    """All members equal to I: a non-expanding negative control."""
    return build_ensemble("explicit", D, d, unitaries=np.broadcast_to(np.eye(D), (d, D, D)))


def product_ensemble(ensemble: UnitaryEnsemble, k: int, cap: int = 512) -> UnitaryEnsemble:
    """All ordered products U_{i1} ... U_{ik}; its superoperator is the k-th power."""
    if k < 1:
        raise ValueError("k must be >= 1")
    size = ensemble.d**k
    if size > cap:
        raise DimensionCapError(f"product ensemble size {size} exceeds cap {cap}")
    if k == 1:
        return ensemble
    us = []
    for idx in itertools.product(range(ensemble.d), repeat=k):
        u = ensemble.unitaries[idx[0]]
        for i in idx[1:]:
            u = u @ ensemble.unitaries[i]
        us.append(u)
    return UnitaryEnsemble(ensemble.D, size, np.array(us), kind="product", seed=ensemble.seed)


def channel(ensemble: UnitaryEnsemble, x) -> np.ndarray:
    """E(X) = (1/d) sum_i U_i X U_i^H."""
    u = ensemble.unitaries
    return np.mean(u @ np.asarray(x) @ u.conj().transpose(0, 2, 1), axis=0)


def adjoint_channel(ensemble: UnitaryEnsemble, x) -> np.ndarray:
    u = ensemble.unitaries
    return np.mean(u.conj().transpose(0, 2, 1) @ np.asarray(x) @ u, axis=0)


def _vector_of(ensemble, state):
    if isinstance(state, linalg.RegisteredState):
        if len(state.dims) != 2 or state.dims != (ensemble.D, ensemble.D):
            raise DimensionError(f"expected two registers of dimension {ensemble.D}, got {state.registers}")
        return state.amplitudes
    v = np.asarray(state, dtype=complex).reshape(-1)
    if v.size != ensemble.D**2:
        raise DimensionError(f"expected a vector of length {ensemble.D ** 2}, got {v.size}")
    return v


def apply_superop(ensemble: UnitaryEnsemble, state) -> np.ndarray:
    """(1/d) sum_i (U_i (x) conj U_i)|psi>, returned unnormalized.  Cost O(d D^3)."""
    v = _vector_of(ensemble, state)
    D = ensemble.D
    return channel(ensemble, v.reshape(D, D)).reshape(-1)


def apply_superop_adjoint(ensemble: UnitaryEnsemble, state) -> np.ndarray:
    v = _vector_of(ensemble, state)
    D = ensemble.D
    return adjoint_channel(ensemble, v.reshape(D, D)).reshape(-1)


def superop_matrix(ensemble: UnitaryEnsemble) -> np.ndarray:
    """Materialized (1/d) sum_i U_i (x) conj U_i, for small D only."""
    return sum(linalg.kron(u, u.conj()) for u in ensemble.unitaries) / ensemble.d


def phi_vector(D: int) -> np.ndarray:
    return np.eye(D).reshape(-1) / np.sqrt(D)


@dataclass(frozen=True)
class ExpanderReport:
    lambda_: float
    fixed_point_residual: float
    mode: str

    @property
    def c(self) -> float:
        return 1.0 - self.lambda_

    def as_dict(self) -> dict:
        return {"lambda": self.lambda_, "c": self.c, "fixed_point_residual": self.fixed_point_residual,
                "mode": self.mode}


def expander_lambda(ensemble: UnitaryEnsemble, mode: str = "auto", tol: float = 1e-10,
                    seed: int = 0) -> ExpanderReport:
    """Largest singular value of the superoperator on the complement of |phi_D>.

    Both the superoperator and its adjoint fix |phi_D>, so that complement is
    invariant and lambda equals ||E_hat - |phi_D><phi_D|||.
    """
    D = ensemble.D
    phi = phi_vector(D)
    resid = float(np.linalg.norm(apply_superop(ensemble, phi) - phi))
    if D == 1:
        return ExpanderReport(0.0, resid, "trivial")
    if mode == "auto":
        mode = "dense" if D * D <= linalg.DENSE_LIMIT else "iterative"
    if mode == "dense":
        if D * D > linalg.DENSE_LIMIT:
            raise DimensionCapError(f"dense lambda needs D^2 <= {linalg.DENSE_LIMIT}")
        a = superop_matrix(ensemble) - np.outer(phi, phi.conj())
        lam = float(scipy.linalg.svdvals(a)[0])
    elif mode == "iterative":
        def neg_gram(v):
            v = v - phi * np.vdot(phi, v)
            w = apply_superop_adjoint(ensemble, apply_superop(ensemble, v))
            w = w - phi * np.vdot(phi, w)
            return -w

        # the phi direction maps to 0, above every other -sigma^2, so it never wins
        w, _ = linalg.hermitian_eigs(neg_gram, k=1, mode="iterative", dim=D * D, tol=tol, seed=seed)
        lam = float(np.sqrt(max(0.0, -w[0])))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return ExpanderReport(lam, resid, mode)


def commutant_basis(unitaries, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis (as D x D matrices) of {X : X U = U X for every U given}."""
    unitaries = [np.asarray(u) for u in unitaries]
    D = unitaries[0].shape[0]
    eye = np.eye(D)
    # row-major vec: vec(U X) = (U (x) I) vec X,  vec(X U) = (I (x) U^T) vec X
    stack = np.vstack([np.kron(u, eye) - np.kron(eye, u.T) for u in unitaries])
    _, s, vh = scipy.linalg.svd(stack, full_matrices=True, lapack_driver="gesvd")
    s = np.concatenate([s, np.zeros(vh.shape[0] - s.size)])
    null = vh[s <= tol * max(1.0, s.max(initial=0.0))]
    return null.conj().reshape(-1, D, D)


def certified_ensemble(D: int, d: int = 3, seed: int = 0, min_c: float = 0.02, max_reseeds: int = 32,
                       kind: str = "haar-with-identity", mode: str = "auto"):
    """First seed in ``seed, seed+1, ...`` whose ensemble has ``1 - lambda >= min_c``.

    Returns ``(ensemble, report)``; the accepted seed is ``ensemble.seed``.
    """
    for s in range(seed, seed + max_reseeds + 1):
        ens = build_ensemble(kind, D, d, seed=s)
        rep = expander_lambda(ens, mode=mode)
        if D == 1 or rep.c >= min_c:
            return ens, rep
    raise CertificationError(f"no {kind} ensemble with c >= {min_c} in seeds {seed}..{seed + max_reseeds}")
