"""Dense complex linear algebra on named tensor-product registers.

States are stored as flat amplitude vectors in row-major order over an ordered
list of ``(name, dimension)`` registers, so the first register is the most
significant index.  Everything here is a pure function of its inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import (
    ConvergenceError,
    DimensionCapError,
    DimensionError,
    RegisterNameError,
)

#: Maximum number of matrix entries ``kron`` will produce.
MAX_ENTRIES = 1 << 28
#: Largest dimension diagonalized densely in ``mode="auto"``.
DENSE_LIMIT = 4096
#: Schmidt weights below this are dropped before taking logarithms.
SCHMIDT_CUTOFF = 1e-12

UNITARY_TOL = 1e-12
HERMITIAN_TOL = 1e-12


def kron(a, b, cap: int = MAX_ENTRIES) -> np.ndarray:
    """Kronecker product with a guard on the size of the result."""
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    rows = a.shape[0] * b.shape[0]
    cols = a.shape[1] * b.shape[1]
    if rows * cols > cap:
        raise DimensionCapError(f"kron result {rows}x{cols} exceeds cap of {cap} entries")
    return np.kron(a, b)


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol)


def is_hermitian(a, tol: float = HERMITIAN_TOL) -> bool:
    if scipy.sparse.issparse(a):
        diff = a - a.conj().T
        return diff.nnz == 0 or bool(np.abs(diff).max() <= tol)
    a = np.asarray(a)
    return a.ndim == 2 and a.shape[0] == a.shape[1] and bool(np.abs(a - a.conj().T).max() <= tol)


def frobenius(x) -> float:
    return float(np.linalg.norm(x))


def operator_norm(x) -> float:
    return float(np.linalg.norm(x, 2))


@dataclass(frozen=True)
class RegisteredState:
    """Normalized pure state on an ordered list of named registers."""

    registers: tuple
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        names = [n for n, _ in regs]
        if len(set(names)) != len(names):
            raise RegisterNameError(f"duplicate register names in {names}")
        if any(d < 1 for _, d in regs):
            raise DimensionError(f"register dimensions must be positive: {regs}")
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        size = int(np.prod([d for _, d in regs], dtype=np.int64)) if regs else 1
        if amps.size != size:
            raise DimensionError(f"{amps.size} amplitudes for register dims {[d for _, d in regs]}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("non-finite amplitudes")
        if abs(np.linalg.norm(amps) - 1.0) > 1e-12:
            raise ValueError(f"state not normalized (norm {np.linalg.norm(amps)!r})")
        amps = amps.copy()
        amps.flags.writeable = False
        object.__setattr__(self, "registers", regs)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def normalized(cls, registers, vector) -> "RegisteredState":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(registers, v / norm)

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise RegisterNameError(f"unknown register {name!r}; have {self.names}") from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def permute(self, order: Sequence[str]) -> "RegisteredState":
        """Reorder registers; ``order`` must list every register once."""
        order = tuple(order)
        if sorted(order) != sorted(self.names):
            raise RegisterNameError(f"{order} is not a permutation of {self.names}")
        axes = [self.index(n) for n in order]
        amps = np.ascontiguousarray(self.tensor().transpose(axes)).reshape(-1)
        return RegisteredState(tuple(self.registers[i] for i in axes), amps)

    def overlap(self, other: "RegisteredState") -> complex:
        if other.names != self.names:
            other = other.permute(self.names)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def product_state(registers, levels) -> RegisteredState:
    """Computational basis state with ``levels[k]`` on register ``k``."""
    dims = [int(d) for _, d in registers]
    v = np.zeros(int(np.prod(dims)), dtype=complex)
    v[np.ravel_multi_index(tuple(levels), dims)] = 1.0
    return RegisteredState(registers, v)


def maximally_entangled(D: int, names=("L", "R")) -> RegisteredState:
    """(1/sqrt D) sum_x |x>|x> on two registers of dimension D."""
    if D < 1:
        raise DimensionError("D must be >= 1")
    return RegisteredState(((names[0], D), (names[1], D)), np.eye(D).reshape(-1) / np.sqrt(D))


def _split(state: RegisteredState, left: Sequence[str]) -> np.ndarray:
    """Matrix with rows indexed by ``left`` (in the given order) and columns by the rest."""
    left = tuple(left)
    for n in left:
        state.index(n)
    if len(set(left)) != len(left):
        raise RegisterNameError(f"repeated register in {left}")
    rest = tuple(n for n in state.names if n not in left)
    axes = [state.index(n) for n in left + rest]
    dl = int(np.prod([state.dims[state.index(n)] for n in left], dtype=np.int64))
    return state.tensor().transpose(axes).reshape(dl, -1)


def partial_trace(state: RegisteredState, keep: Sequence[str]) -> np.ndarray:
    """Reduced density operator on ``keep``, ordered as ``keep`` lists them."""
    m = _split(state, keep)
    return m @ m.conj().T


@dataclass(frozen=True)
class SchmidtDecomposition:
    cut: tuple
    coefficients: np.ndarray
    left_vectors: np.ndarray  # columns
    right_vectors: np.ndarray  # columns

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.coefficients**2 > SCHMIDT_CUTOFF))

    def reconstruct(self) -> np.ndarray:
        """Amplitudes in (left registers, right registers) order."""
        return np.einsum("k,ik,jk->ij", self.coefficients, self.left_vectors, self.right_vectors).reshape(-1)


def _resolve_cut(state: RegisteredState, cut) -> tuple:
    if len(cut) != 2:
        raise ValueError("cut must be a pair (left, right)")
    left, right = (tuple(cut[0]), tuple(cut[1]))
    for n in left + right:
        state.index(n)
    if sorted(left + right) != sorted(state.names):
        raise RegisterNameError(f"cut {left} | {right} does not partition {state.names}")
    return left, right


def schmidt(state: RegisteredState, cut) -> SchmidtDecomposition:
    left, right = _resolve_cut(state, cut)
    m = _split(state, left + right).reshape(
        int(np.prod([state.dims[state.index(n)] for n in left], dtype=np.int64)), -1
    )
    u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return SchmidtDecomposition((left, right), s, u, vh.T)


def entropy_from_weights(weights) -> float:
    """Shannon entropy in bits, ignoring weights below the Schmidt cutoff."""
    w = np.asarray(weights, dtype=float)
    w = w[w > SCHMIDT_CUTOFF]
    return float(max(0.0, -np.sum(w * np.log2(w))))


def entanglement_entropy(state: RegisteredState, cut) -> float:
    return entropy_from_weights(schmidt(state, cut).coefficients ** 2)


def von_neumann_entropy(rho) -> float:
    return entropy_from_weights(np.linalg.eigvalsh(rho))


def haar_unitary(dim: int, seed=None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Haar-distributed unitary from QR of a complex Ginibre matrix.

    The phases of R's diagonal are folded back into Q; without that step the
    QR output is not Haar distributed.
    """
    if dim < 1:
        raise DimensionError("dim must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    # one Newton-Schulz polish step keeps ||Q^H Q - I|| at machine precision for large dim
    q = 1.5 * q - 0.5 * q @ (q.conj().T @ q)
    return q


def lanczos_lowest(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    k: int = 1,
    tol: float = 1e-8,
    max_krylov: int = 200,
    max_restarts: int = 50,
    seed: int = 0,
):
    """Lowest ``k`` eigenpairs of a Hermitian operator given only its action.

    Lanczos with full reorthogonalization.  Eigenpairs are found one at a time
    and locked; later Krylov spaces are kept orthogonal to the locked vectors,
    which is what lets exactly degenerate eigenvalues show up with their full
    multiplicity.  A stalled run restarts from its current Ritz vector.
    """
    rng = np.random.default_rng(seed)
    locked_vecs: list[np.ndarray] = []
    locked_vals: list[float] = []
    m_max = min(max_krylov, dim)

    def orth(w, basis):
        for _ in range(2):
            for b in basis:
                w = w - b * np.vdot(b, w)
        return w

    while len(locked_vals) < k:
        if len(locked_vals) >= dim:
            break
        room = dim - len(locked_vals)
        v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        best = np.inf
        theta = None
        for _restart in range(max_restarts):
            v = orth(v, locked_vecs)
            v = v / np.linalg.norm(v)
            basis = [v]
            alpha: list[float] = []
            beta: list[float] = []
            ritz = None
            for j in range(min(m_max, room)):
                w = matvec(basis[j])
                alpha.append(float(np.vdot(basis[j], w).real))
                w = orth(w, locked_vecs + basis)
                b = float(np.linalg.norm(w))
                done = b < 1e-13 or j + 1 == min(m_max, room)
                if done or (j + 1) % 10 == 0:
                    evals, evecs = scipy.linalg.eigh_tridiagonal(np.array(alpha), np.array(beta)) if j else (
                        np.array(alpha), np.ones((1, 1)))
                    theta, s = float(evals[0]), evecs[:, 0]
                    est = abs(b * s[-1])
                    ritz = np.column_stack(basis) @ s
                    if est < 0.1 * tol or done:
                        break
                beta.append(b)
                basis.append(w / b)
            ritz = ritz / np.linalg.norm(ritz)
            res = float(np.linalg.norm(matvec(ritz) - theta * ritz))
            best = min(best, res)
            if res <= tol:
                break
            v = ritz
        else:
            raise ConvergenceError(
                f"Lanczos failed to converge eigenpair {len(locked_vals)} within {max_restarts} restarts",
                best_residual=best,
            )
        locked_vecs.append(ritz)
        locked_vals.append(theta)

    order = np.argsort(locked_vals, kind="stable")
    vals = np.array(locked_vals)[order]
    vecs = np.column_stack(locked_vecs)[:, order]
    return vals, vecs


def _as_dense(op, dim):
    if callable(op) and not hasattr(op, "shape"):
        eye = np.eye(dim, dtype=complex)
        return np.column_stack([op(eye[:, j]) for j in range(dim)])
    if scipy.sparse.issparse(op):
        return op.toarray()
    return np.asarray(op)


def hermitian_eigs(op, k: int = 1, mode: str = "auto", dim: int | None = None, tol: float = 1e-8,
                   seed: int = 0, check_residual: bool = True, **lanczos_kw):
    """Lowest ``k`` eigenvalues (ascending) and eigenvectors (columns).

    ``op`` may be a dense array, a scipy sparse matrix, or a callable matvec
    (``dim`` required).  ``mode="auto"`` uses dense diagonalization up to
    ``DENSE_LIMIT`` and Lanczos above.
    """
    if callable(op) and not hasattr(op, "shape"):
        if dim is None:
            raise DimensionError("dim is required for a matvec operator")
        matvec = op
    else:
        dim = op.shape[0]
        if op.shape != (dim, dim):
            raise DimensionError(f"operator must be square, got {op.shape}")
        matvec = op.__matmul__
    k = min(k, dim)
    if mode == "auto":
        mode = "dense" if dim <= DENSE_LIMIT else "iterative"
    if mode == "dense":
        a = _as_dense(op, dim)
        if np.abs(a - a.conj().T).max() > 1e-10 * max(1.0, np.abs(a).max()):
            raise ValueError("operator is not Hermitian")
        a = (a + a.conj().T) / 2
        w, v = scipy.linalg.eigh(a, subset_by_index=[0, k - 1], driver="evr")
    elif mode == "iterative":
        w, v = lanczos_lowest(matvec, dim, k, tol=tol, seed=seed, **lanczos_kw)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if check_residual:
        res = max((np.linalg.norm(matvec(v[:, j]) - w[j] * v[:, j]) for j in range(k)), default=0.0)
        if res > tol:
            raise ConvergenceError(f"eigenpair residual {res:.3e} above {tol:.1e}", best_residual=res)
    return w, v
