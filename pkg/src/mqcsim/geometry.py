"""Spin-site geometries and dipolar coupling tables.

Positions are 3-vectors in arbitrary length units.  Couplings follow the
secular dipolar form d_ij = prefactor * (1 - 3 cos^2 theta_ij) / r_ij^3,
where theta_ij is the angle between the (rotated) inter-site vector and
the lab z axis (the field axis).  The crystal orientation is given as
intrinsic Z-Y-Z Euler angles applied to the site coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionCapError, MqcsimError

#: Default cap on the spin count (dense 2^n x 2^n linear algebra).
DEFAULT_MAX_SPINS = 14

_COINCIDENT_TOL = 1e-12


def _dense_memory_gib(n: int) -> float:
    """Rough memory footprint of one dense complex matrix at 2^n."""
    dim = 2**n
    return dim * dim * 16 / 2**30


def check_spin_cap(n: int, max_spins) -> None:
    """Reject spin counts beyond the dense-matrix cap with a size estimate.

    ``max_spins=None`` disables the check (geometry files can describe more
    sites than the simulator will accept)."""
    if max_spins is not None and n > max_spins:
        raise DimensionCapError(
            f"{n} spins exceeds the cap of {max_spins} "
            f"(a dense 2^{n} x 2^{n} complex matrix needs "
            f"~{_dense_memory_gib(n):.1f} GiB); raise max_spins explicitly "
            "if you accept the memory cost"
        )


@dataclass(frozen=True)
class SiteSet:
    """A set of spin sites: positions (n, 3) plus a geometry label."""

    positions: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise MqcsimError("positions must be a non-empty (n, 3) array")
        object.__setattr__(self, "positions", pos)
        d = _pair_distances(pos)
        if d.size and d.min() < _COINCIDENT_TOL:
            raise MqcsimError("coincident sites (zero pairwise distance)")

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def to_text(self) -> str:
        lines = [f"# siteset label={self.label} n={self.n}", "# i x y z"]
        for i, (x, y, z) in enumerate(self.positions):
            lines.append(f"{i} {float(x)!r} {float(y)!r} {float(z)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SiteSet":
        label = "custom"
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("label="):
                        label = tok[6:]
                continue
            parts = line.split()
            rows.append([float(v) for v in parts[1:4]])
        return cls(positions=np.array(rows), label=label)


def _pair_distances(pos: np.ndarray) -> np.ndarray:
    n = pos.shape[0]
    if n < 2:
        return np.empty(0)
    diff = pos[:, None, :] - pos[None, :, :]
    d = np.sqrt((diff**2).sum(-1))
    iu = np.triu_indices(n, k=1)
    return d[iu]


@dataclass(frozen=True)
class CouplingTable:
    """Pairwise couplings d_ij (i < j) with the parameters that produced them."""

    n_sites: int
    entries: dict  # (i, j) with i < j -> d_ij
    prefactor: float = 1.0
    orientation: tuple = (0.0, 0.0, 0.0)

    def as_matrix(self) -> np.ndarray:
        """Symmetric (n, n) coupling matrix with zero diagonal."""
        m = np.zeros((self.n_sites, self.n_sites))
        for (i, j), d in self.entries.items():
            m[i, j] = m[j, i] = d
        return m

    def to_text(self) -> str:
        a, b, g = self.orientation
        lines = [
            f"# couplings n={self.n_sites} prefactor={self.prefactor!r} "
            f"orientation={a!r},{b!r},{g!r}",
            "# i j d_ij",
        ]
        for (i, j) in sorted(self.entries):
            lines.append(f"{i} {j} {float(self.entries[(i, j)])!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CouplingTable":
        n = 0
        prefactor = 1.0
        orientation = (0.0, 0.0, 0.0)
        entries = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("n="):
                        n = int(tok[2:])
                    elif tok.startswith("prefactor="):
                        prefactor = float(tok[10:])
                    elif tok.startswith("orientation="):
                        orientation = tuple(float(v) for v in tok[12:].split(","))
                continue
            i, j, d = line.split()
            entries[(int(i), int(j))] = float(d)
        return cls(n_sites=n, entries=entries, prefactor=prefactor,
                   orientation=orientation)


def euler_zyz(alpha: float, beta: float, gamma: float) -> np.ndarray:
    """Intrinsic Z-Y-Z rotation matrix R = Rz(alpha) Ry(beta) Rz(gamma)."""
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cg, sg = math.cos(gamma), math.sin(gamma)
    rz_a = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry_b = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz_g = np.array([[cg, -sg, 0], [sg, cg, 0], [0, 0, 1]])
    return rz_a @ ry_b @ rz_g


def build_chain(spacing: float, n: int, axis=(0.0, 0.0, 1.0),
                max_spins=None) -> SiteSet:
    """Collinear sites at uniform spacing along ``axis`` (default z)."""
    if n < 1:
        raise MqcsimError("need at least one site")
    if spacing <= 0:
        raise MqcsimError("spacing must be positive")
    check_spin_cap(n, max_spins)
    u = np.asarray(axis, dtype=float)
    u = u / np.linalg.norm(u)
    pos = spacing * np.arange(n)[:, None] * u[None, :]
    return SiteSet(positions=pos, label="chain")


def build_fcc(lattice_constant: float, count: int,
              max_spins=None) -> SiteSet:
    """Central fragment of an FCC lattice, ordered by distance from the center.

    The first coordination shell (12 sites) sits at lattice_constant / sqrt(2),
    the second (6 sites) at lattice_constant.  Ties at equal radius are broken
    lexicographically by coordinates so the ordering is deterministic.
    """
    if lattice_constant <= 0:
        raise MqcsimError("lattice constant must be positive")
    if count < 1:
        raise MqcsimError("site budget must be at least 1")
    check_spin_cap(count, max_spins)
    a = lattice_constant
    # FCC = cubic points (i, j, k) * a/2 with i + j + k even.
    m = 1
    while True:
        pts = []
        rng = range(-m, m + 1)
        for i in rng:
            for j in rng:
                for k in rng:
                    if (i + j + k) % 2 == 0:
                        pts.append((i, j, k))
        pts = np.array(pts, dtype=float) * (a / 2.0)
        r2 = (pts**2).sum(1)
        # Keep only points strictly inside the box radius so no shell is
        # truncated by the cube boundary.
        inside = r2 <= (m * a / 2.0) ** 2 + 1e-9
        if inside.sum() >= count:
            pts = pts[inside]
            r2 = r2[inside]
            break
        m += 1
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0], np.round(r2, 9)))
    return SiteSet(positions=pts[order][:count], label="fcc")


def couplings(sites: SiteSet, orientation=(0.0, 0.0, 0.0), prefactor: float = 1.0,
              cutoff: float = math.inf) -> CouplingTable:
    """Dipolar coupling table for all site pairs within ``cutoff``."""
    if cutoff <= 0:
        raise MqcsimError("cutoff must be positive (or infinite)")
    rot = euler_zyz(*orientation)
    pos = sites.positions @ rot.T
    entries = {}
    for i in range(sites.n):
        for j in range(i + 1, sites.n):
            vec = pos[j] - pos[i]
            r = float(np.linalg.norm(vec))
            if r < _COINCIDENT_TOL:
                raise MqcsimError(f"coincident sites {i}, {j}")
            if r > cutoff:
                continue
            cos2 = (vec[2] / r) ** 2
            entries[(i, j)] = prefactor * (1.0 - 3.0 * cos2) / r**3
    return CouplingTable(n_sites=sites.n, entries=entries, prefactor=prefactor,
                         orientation=tuple(float(v) for v in orientation))


def nn_prefactor(sites: SiteSet, target: float) -> float:
    """Prefactor whose angular-independent scale at the nearest-neighbor
    distance equals ``target``: prefactor = target * r_nn^3."""
    d = _pair_distances(sites.positions)
    if d.size == 0:
        raise MqcsimError("need at least two sites to define a neighbor distance")
    return target * float(d.min()) ** 3


def powder_orientations(count: int, seed: int) -> list:
    """Deterministic sample of Euler angles uniform over the sphere.

    Azimuth and the third angle are uniform on [0, 2 pi); the polar angle is
    cos-uniform.  The same seed always yields the same list.
    """
    if count < 1:
        raise MqcsimError("count must be at least 1")
    rng = np.random.default_rng(seed)
    alphas = rng.uniform(0.0, 2.0 * math.pi, count)
    betas = np.arccos(rng.uniform(-1.0, 1.0, count))
    gammas = rng.uniform(0.0, 2.0 * math.pi, count)
    return [(float(a), float(b), float(g))
            for a, b, g in zip(alphas, betas, gammas)]
