"""Zeeman-basis states and operators for n spin-1/2 particles.

Basis convention (used everywhere in the package): basis index
b in [0, 2^n) is a bitstring where bit i (least significant = site 0)
set means spin i up; mz(b) = popcount(b) - n/2 in units of hbar.

Hamiltonians built here are real symmetric in this basis, and are stored
as float64 so eigendecompositions take the fast real path; the ``matrix``
attribute is still a dense dim x dim array usable as complex.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError, MqcsimError
from .geometry import DEFAULT_MAX_SPINS, check_spin_cap

HERMITICITY_RTOL = 1e-12


@functools.lru_cache(maxsize=None)
def _mz_table(n: int) -> np.ndarray:
    b = np.arange(2**n, dtype=np.uint32)
    pop = np.zeros(2**n, dtype=np.int64)
    for i in range(n):
        pop += (b >> i) & 1
    out = pop - n / 2.0
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HilbertSpace:
    """The 2^n Zeeman product basis of n spin-1/2 sites."""

    n: int
    max_spins: int = DEFAULT_MAX_SPINS

    def __post_init__(self):
        if self.n < 1:
            raise MqcsimError("need at least one spin")
        check_spin_cap(self.n, self.max_spins)

    @property
    def dim(self) -> int:
        return 2**self.n

    @property
    def mz(self) -> np.ndarray:
        """mz(b) for every basis index b, shape (dim,)."""
        return _mz_table(self.n)


class _EigCache:
    """Eigendecomposition of a Hermitian operator plus derived transforms."""

    def __init__(self, matrix: np.ndarray):
        if np.isrealobj(matrix) or np.allclose(matrix.imag, 0.0):
            w, v = np.linalg.eigh(np.ascontiguousarray(matrix.real))
        else:
            w, v = np.linalg.eigh(matrix)
        self.eigvals = w
        self.eigvecs = v
        self.extras: dict = {}

    def to_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        """V^dagger m V (m in the Zeeman basis)."""
        v = self.eigvecs
        return _mm(_mm_h(v, m), v)


def _mm(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a @ b, splitting complex operands so real-real BLAS is used.

    The .real/.imag views of a complex array are strided and must be
    copied to contiguous storage first, or matmul silently leaves BLAS
    for a loop that is orders of magnitude slower.
    """
    if np.isrealobj(a) and np.iscomplexobj(b):
        br = np.ascontiguousarray(b.real)
        bi = np.ascontiguousarray(b.imag)
        return a @ br + 1j * (a @ bi)
    if np.iscomplexobj(a) and np.isrealobj(b):
        ar = np.ascontiguousarray(a.real)
        ai = np.ascontiguousarray(a.imag)
        return ar @ b + 1j * (ai @ b)
    return a @ b


def _mm_h(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a^dagger @ b with the same dtype splitting."""
    ah = a.conj().T if np.iscomplexobj(a) else a.T
    return _mm(ah, b)


@dataclass
class Operator:
    """Dense operator on a HilbertSpace with M_z-block metadata."""

    space: HilbertSpace
    matrix: np.ndarray
    hermitian: bool = True
    coherence_profile: frozenset = field(default=None)  # set of Delta M values

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise MqcsimError("matrix shape does not match space dimension")
        self.matrix = m
        if self.hermitian:
            scale = np.abs(m).max() or 1.0
            if np.abs(m - m.conj().T).max() > HERMITICITY_RTOL * scale:
                raise InvariantError("operator flagged hermitian is not")
        if self.coherence_profile is None:
            self.coherence_profile = self._compute_profile()
        self._eig = None

    def _compute_profile(self) -> frozenset:
        mz = self.space.mz
        scale = np.abs(self.matrix).max()
        if scale == 0.0:
            return frozenset()
        rows, cols = np.nonzero(np.abs(self.matrix) > 1e-14 * scale)
        dm = np.unique(np.rint(mz[rows] - mz[cols]).astype(int))
        return frozenset(int(v) for v in dm)

    @property
    def eig(self) -> _EigCache:
        """Cached eigendecomposition (requires hermitian)."""
        if not self.hermitian:
            raise MqcsimError("eigendecomposition cache requires a Hermitian operator")
        if self._eig is None:
            self._eig = _EigCache(self.matrix)
        return self._eig

    def to_text(self) -> str:
        """Dense row-major text export, one 're,im' pair per element."""
        m = np.asarray(self.matrix, dtype=complex)
        lines = [f"# operator dim={self.space.dim} n={self.space.n}"]
        for row in m:
            lines.append(" ".join(f"{float(v.real)!r},{float(v.imag)!r}"
                                  for v in row))
        return "\n".join(lines) + "\n"


@dataclass
class DensityOperator:
    """System state: a Hermitian matrix, by convention the traceless
    high-temperature deviation from the identity."""

    space: HilbertSpace
    matrix: np.ndarray
    traceless: bool = True

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.shape != (self.space.dim, self.space.dim):
            raise MqcsimError("matrix shape does not match space dimension")
        self.matrix = m
        scale = np.abs(m).max() or 1.0
        if np.abs(m - m.conj().T).max() > 1e-10 * scale:
            raise InvariantError("density operator is not Hermitian")
        if self.traceless:
            fro = np.linalg.norm(m)
            if abs(np.trace(m)) > 1e-12 * (fro or 1.0):
                raise InvariantError("density operator flagged traceless is not")

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))


def _pair_masks(space: HilbertSpace, i: int, j: int):
    b = np.arange(space.dim, dtype=np.int64)
    bi = (b >> i) & 1
    bj = (b >> j) & 1
    return b, bi, bj


def build_Iz(space: HilbertSpace) -> Operator:
    """Collective I_z: diagonal with entry mz(b)."""
    return Operator(space, np.diag(space.mz), hermitian=True,
                    coherence_profile=frozenset({0}))


def build_Hdd(table, space: HilbertSpace) -> Operator:
    """Secular dipolar Hamiltonian: sum over pairs of
    d_ij [2 Iz_i Iz_j - (Ix_i Ix_j + Iy_i Iy_j)].  Conserves M_z."""
    if table.n_sites != space.n:
        raise MqcsimError("coupling table and space have different site counts")
    dim = space.dim
    h = np.zeros((dim, dim))
    diag = np.zeros(dim)
    for (i, j), d in table.entries.items():
        b, bi, bj = _pair_masks(space, i, j)
        same = bi == bj
        # 2 Iz Iz: +d/2 when spins parallel, -d/2 otherwise.
        diag += np.where(same, 0.5 * d, -0.5 * d)
        # flip-flop (Ix Ix + Iy Iy) on antiparallel pairs: off-diagonal -d/2.
        sel = b[~same]
        h[sel ^ ((1 << i) | (1 << j)), sel] += -0.5 * d
    h[np.diag_indices(dim)] += diag
    return Operator(space, h, hermitian=True)


def build_H0(table, space: HilbertSpace) -> Operator:
    """Double-quantum Hamiltonian: -sum d_ij [Ix_i Ix_j - Iy_i Iy_j].
    Connects only basis pairs with Delta M_z = +-2."""
    if table.n_sites != space.n:
        raise MqcsimError("coupling table and space have different site counts")
    dim = space.dim
    h = np.zeros((dim, dim))
    for (i, j), d in table.entries.items():
        b, bi, bj = _pair_masks(space, i, j)
        # Ix Ix - Iy Iy = (I+ I+ + I- I-)/2: flips parallel pairs together.
        sel = b[bi == bj]
        h[sel ^ ((1 << i) | (1 << j)), sel] += -0.5 * d
    return Operator(space, h, hermitian=True)


def build_Heff(table, p: float, space: HilbertSpace) -> Operator:
    """Mixed effective Hamiltonian (1 - p) H0 + p Hdd."""
    if not 0.0 <= p <= 1.0:
        raise MqcsimError(f"perturbation strength p={p} outside [0, 1]")
    h0 = build_H0(table, space)
    hdd = build_Hdd(table, space)
    return Operator(space, (1.0 - p) * h0.matrix + p * hdd.matrix, hermitian=True)


def rotation_z(space: HilbertSpace, phi: float) -> Operator:
    """Diagonal unitary with entries exp(-i phi mz(b))."""
    return Operator(space, np.diag(np.exp(-1j * phi * space.mz)),
                    hermitian=False, coherence_profile=frozenset({0}))


def thermal_state(space: HilbertSpace) -> DensityOperator:
    """High-temperature deviation state: I_z normalized so Tr{rho0 Iz} = 1."""
    mz = space.mz
    norm = float((mz**2).sum())  # Tr{Iz^2} = n 2^n / 4
    return DensityOperator(space, np.diag(mz / norm), traceless=True)


def trace_iz_squared(space: HilbertSpace) -> float:
    """Tr{Iz^2} = n 2^n / 4; the scale between signal and overlap units."""
    return space.n * space.dim / 4.0


def degeneracy(K: int, Mz: float) -> int:
    """Number of K-spin Zeeman states at total magnetic quantum number Mz:
    K! / [(K/2 - Mz)! (K/2 + Mz)!]."""
    k_up = K / 2.0 + Mz
    if abs(Mz) > K / 2.0 or abs(k_up - round(k_up)) > 1e-9:
        raise MqcsimError(f"incompatible K={K}, Mz={Mz}")
    return math.comb(K, round(k_up))
