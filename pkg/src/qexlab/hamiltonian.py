"""Sums of local terms on named registers, and their spectral certification."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Sequence

import numpy as np
import scipy.sparse

from . import linalg
from .errors import DimensionCapError, DimensionError, ProjectorError, RegisterNameError

#: Largest total Hilbert-space dimension a HamiltonianSpec will assemble.
MAX_DIM = 1 << 20
PROJECTOR_TOL = 1e-9
TERM_HERMITIAN_TOL = 1e-10


def embed_operator(op, support: Sequence[str], registers) -> scipy.sparse.csr_matrix:
    """Lift an operator on ``support`` (in that order) to the full register space."""
    names = [n for n, _ in registers]
    dims = [d for _, d in registers]
    try:
        s_idx = [names.index(n) for n in support]
    except ValueError:
        raise RegisterNameError(f"support {tuple(support)} not within registers {tuple(names)}") from None
    r_idx = [i for i in range(len(names)) if i not in s_idx]
    ds = int(np.prod([dims[i] for i in s_idx], dtype=np.int64))
    dr = int(np.prod([dims[i] for i in r_idx], dtype=np.int64))
    op = scipy.sparse.csr_matrix(op)
    if op.shape != (ds, ds):
        raise DimensionError(f"operator shape {op.shape} does not match support dimension {ds}")
    big = scipy.sparse.kron(op, scipy.sparse.identity(dr, format="csr"), format="csr")
    if s_idx + r_idx == list(range(len(names))):
        return big
    order = s_idx + r_idx
    # perm[p] = original flat index sitting at position p of the (support, rest) ordering
    perm = np.arange(ds * dr).reshape(dims).transpose(order).reshape(-1)
    pos = np.empty_like(perm)
    pos[perm] = np.arange(perm.size)
    return big[pos][:, pos].tocsr()


@dataclass(frozen=True)
class Term:
    name: str
    support: tuple
    matrix: object  # dense ndarray or scipy sparse
    scale: float = 1.0
    projector: bool = False

    def operator(self):
        return self.matrix * self.scale


@dataclass(frozen=True)
class HamiltonianSpec:
    registers: tuple
    terms: tuple = ()

    def __post_init__(self):
        regs = tuple((str(n), int(d)) for n, d in self.registers)
        object.__setattr__(self, "registers", regs)
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.dim > MAX_DIM:
            raise DimensionCapError(f"total dimension {self.dim} exceeds cap {MAX_DIM}")
        names = self.names
        for t in self.terms:
            for n in t.support:
                if n not in names:
                    raise RegisterNameError(f"term {t.name!r} acts on unknown register {n!r}")
            if t.scale <= 0:
                raise ValueError(f"term {t.name!r} has non-positive scale")
            m = t.matrix
            if not linalg.is_hermitian(m, TERM_HERMITIAN_TOL):
                raise ValueError(f"term {t.name!r} is not Hermitian")
            if t.projector:
                sq = m @ m - m
                err = abs(sq).max() if scipy.sparse.issparse(sq) else np.abs(sq).max()
                if err > PROJECTOR_TOL:
                    raise ProjectorError(f"term {t.name!r} flagged as projector but ||P^2-P|| = {err:.2e}")

    @property
    def names(self) -> tuple:
        return tuple(n for n, _ in self.registers)

    @property
    def dims(self) -> tuple:
        return tuple(d for _, d in self.registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def term(self, name: str) -> Term:
        for t in self.terms:
            if t.name == name:
                return t
        raise KeyError(name)

    def embedded(self, name: str) -> scipy.sparse.csr_matrix:
        t = self.term(name)
        return embed_operator(t.operator(), t.support, self.registers)

    @cached_property
    def sparse(self) -> scipy.sparse.csr_matrix:
        total = scipy.sparse.csr_matrix((self.dim, self.dim), dtype=complex)
        for t in self.terms:
            total = total + embed_operator(t.operator(), t.support, self.registers)
        return total.tocsr()

    def to_dense(self) -> np.ndarray:
        if self.dim > linalg.DENSE_LIMIT:
            raise DimensionCapError(f"refusing to materialize dimension {self.dim} densely")
        return self.sparse.toarray()

    def matvec(self, v) -> np.ndarray:
        return self.sparse @ np.asarray(v)

    def norm_bound(self) -> float:
        """Triangle-inequality bound on ||H||."""
        total = 0.0
        for t in self.terms:
            m = t.matrix.toarray() if scipy.sparse.issparse(t.matrix) else np.asarray(t.matrix)
            total += t.scale * np.linalg.norm(m, 2)
        return float(total)

    def energy(self, state) -> float:
        v = state.amplitudes if isinstance(state, linalg.RegisteredState) else np.asarray(state)
        return float(np.vdot(v, self.matvec(v)).real)

    def residual(self, state, term: str | None = None) -> float:
        v = state.amplitudes if isinstance(state, linalg.RegisteredState) else np.asarray(state)
        op = self.sparse if term is None else self.embedded(term)
        return float(np.linalg.norm(op @ v))

    def combine(self, *others: "HamiltonianSpec", extra_terms=()) -> "HamiltonianSpec":
        regs = list(self.registers)
        terms = list(self.terms)
        for o in others:
            regs += list(o.registers)
            terms += list(o.terms)
        return HamiltonianSpec(tuple(regs), tuple(terms) + tuple(extra_terms))

    def triplets_csv(self, name: str) -> str:
        """One term's matrix as ``row,col,re,im`` lines (unscaled, on its own support)."""
        coo = scipy.sparse.coo_matrix(self.term(name).matrix)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "col", "re", "im"])
        for r, c, v in sorted(zip(coo.row, coo.col, coo.data)):
            w.writerow([int(r), int(c), repr(float(v.real)), repr(float(v.imag))])
        return buf.getvalue()


def rescale_terms(spec: HamiltonianSpec, factor: float, names: Sequence[str] | None = None) -> HamiltonianSpec:
    """Multiply the strength of every term (or only ``names``) by ``factor``."""
    if factor <= 0:
        raise ValueError("factor must be positive")
    terms = tuple(
        replace(t, scale=t.scale * factor) if names is None or t.name in names else t for t in spec.terms
    )
    return HamiltonianSpec(spec.registers, terms)


def degeneracy_tol(norm: float) -> float:
    return 1e-9 * max(1.0, norm)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    ground_degeneracy: int
    gap: float
    certified: dict
    ground_state: linalg.RegisteredState | None = field(default=None, repr=False)
    extras: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    def as_dict(self) -> dict:
        out = {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "ground_degeneracy": int(self.ground_degeneracy),
            "gap": float(self.gap),
            "certified": dict(self.certified),
        }
        out.update(self.extras)
        return out


def spectrum(spec: HamiltonianSpec, k: int = 3, mode: str = "auto", seed: int = 0, tol: float = 1e-8):
    if mode == "auto":
        mode = "dense" if spec.dim <= linalg.DENSE_LIMIT else "iterative"
    op = spec.to_dense() if mode == "dense" else spec.sparse
    return linalg.hermitian_eigs(op, k=k, mode=mode, seed=seed, tol=tol)


def certify(spec: HamiltonianSpec, k: int = 3, gap_bound: float | None = None, cut=None,
            mode: str = "auto", seed: int = 0, ff_tol: float = 1e-10) -> SpectralReport:
    """Lowest ``k`` levels plus frustration-freeness, uniqueness and gap flags.

    ``gap_bound`` is the claimed lower bound on E_1 - E_0 (checked with a 1e-9
    allowance).  If ``cut`` is given and the ground state is unique, the
    report carries its entanglement entropy across that cut.
    """
    w, v = spectrum(spec, k=k, mode=mode, seed=seed)
    tol = degeneracy_tol(spec.norm_bound())
    deg = int(np.sum(w - w[0] <= tol))
    gap = float(w[1] - w[0]) if len(w) > 1 else float("nan")
    flags = {
        "frustration_free": bool(w[0] <= ff_tol),
        "unique_ground": bool(len(w) > 1 and gap > tol),
    }
    if gap_bound is not None:
        flags["gap_at_least"] = bool(gap >= gap_bound - 1e-9)
    ground = linalg.RegisteredState.normalized(spec.registers, v[:, 0])
    extras = {}
    if gap_bound is not None:
        extras["gap_bound"] = float(gap_bound)
    if cut is not None and flags["unique_ground"]:
        extras["entropy"] = linalg.entanglement_entropy(ground, cut)
    return SpectralReport(np.asarray(w), deg, gap, flags, ground, extras)

