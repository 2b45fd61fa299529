"""Unitary propagation under fixed Hamiltonians and pulse-cycle programs.

Propagators built from a Hamiltonian keep the (cached) eigendecomposition
and apply time evolution in the eigenbasis, so repeated times on the same
Hamiltonian cost two matrix products instead of a fresh exponential.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, MqcsimError
from .hilbert import DensityOperator, HilbertSpace, Operator, _mm, _mm_h

UNITARITY_TOL = 1e-10
# Forming U and checking U^dagger U on big spaces costs a full matrix
# product; above this dimension the eigenbasis path is trusted (LAPACK
# returns orthonormal eigenvectors).
UNITARITY_CHECK_MAX_DIM = 1024


class Propagator:
    """exp(-i H t), either via a cached eigendecomposition or an explicit
    unitary (pulsed cycles)."""

    def __init__(self, space: HilbertSpace, *, eig=None, t: float = 0.0,
                 unitary: np.ndarray = None, description: str = ""):
        if (eig is None) == (unitary is None):
            raise MqcsimError("need exactly one of eig or unitary")
        self.space = space
        self.t = t
        self.description = description
        self._eig = eig
        self._unitary = unitary
        if unitary is not None and space.dim <= UNITARITY_CHECK_MAX_DIM:
            _check_unitary(unitary)

    @property
    def unitary(self) -> np.ndarray:
        """Dense unitary matrix (formed lazily for eigenbasis propagators)."""
        if self._unitary is None:
            v, w = self._eig.eigvecs, self._eig.eigvals
            phase = np.exp(-1j * w * self.t)
            u = _mm(v * phase, v.conj().T if np.iscomplexobj(v) else v.T)
            if self.space.dim <= UNITARITY_CHECK_MAX_DIM:
                _check_unitary(u)
            self._unitary = u
        return self._unitary

    def apply(self, rho: DensityOperator) -> DensityOperator:
        """U rho U^dagger."""
        if rho.space.dim != self.space.dim:
            raise MqcsimError("state and propagator dimensions differ")
        if self._eig is not None:
            v, w = self._eig.eigvecs, self._eig.eigvals
            phase = np.exp(-1j * w * self.t)
            y = self._eig.to_eigenbasis(rho.matrix)
            y = (phase[:, None] * y) * phase.conj()[None, :]
            out = _mm(_mm(v, y), v.conj().T if np.iscomplexobj(v) else v.T)
        else:
            u = self.unitary
            out = _mm(_mm(u, rho.matrix), u.conj().T)
        return DensityOperator(rho.space, out, traceless=rho.traceless)

    def conjugated_observable(self, diag: np.ndarray) -> np.ndarray:
        """U^dagger diag(d) U for a diagonal observable (e.g. I_z)."""
        if self._eig is not None and self.t == 0.0:
            return np.diag(diag.astype(complex))
        if self._eig is not None:
            key = ("diag-obs", diag.tobytes())
            w_t = self._eig.extras.get(key)
            if w_t is None:
                v = self._eig.eigvecs
                w_t = _mm_h(v, diag[:, None] * v)
                self._eig.extras[key] = w_t
            v, w = self._eig.eigvecs, self._eig.eigvals
            phase = np.exp(-1j * w * self.t)
            x = (phase.conj()[:, None] * w_t) * phase[None, :]
            return _mm(_mm(v, x), v.conj().T if np.iscomplexobj(v) else v.T)
        u = self.unitary
        return u.conj().T @ (diag[:, None] * u)

    def inverse(self) -> "Propagator":
        if self._eig is not None:
            return Propagator(self.space, eig=self._eig, t=-self.t,
                              description=f"inverse of {self.description}")
        return Propagator(self.space, unitary=self._unitary.conj().T,
                          description=f"inverse of {self.description}")


def _check_unitary(u: np.ndarray) -> None:
    dev = np.abs(u.conj().T @ u - np.eye(u.shape[0])).max()
    if dev > UNITARITY_TOL:
        raise InvariantError(f"propagator not unitary (deviation {dev:.2e})")


def propagator(H: Operator, t: float) -> Propagator:
    """exp(-i H t) from the Hamiltonian's cached eigendecomposition."""
    if not H.hermitian:
        raise MqcsimError("propagator requires a Hermitian generator")
    return Propagator(H.space, eig=H.eig, t=t, description=f"exp(-i H t), t={t}")


def evolve(rho: DensityOperator, U: Propagator) -> DensityOperator:
    """U rho U^dagger (trace, Hermiticity, spectrum and purity preserving)."""
    return U.apply(rho)


def evolve_under(H: Operator, rho: DensityOperator, times):
    """Yield rho evolved under H for each t in ``times``.

    The eigenbasis image of rho is computed once, so each additional time
    costs only the back transformation.
    """
    if not H.hermitian:
        raise MqcsimError("evolve_under requires a Hermitian generator")
    eig = H.eig
    v, w = eig.eigvecs, eig.eigvals
    y0 = eig.to_eigenbasis(rho.matrix)
    vt = v.conj().T if np.iscomplexobj(v) else v.T
    for t in times:
        phase = np.exp(-1j * w * t)
        y = (phase[:, None] * y0) * phase.conj()[None, :]
        yield DensityOperator(rho.space, _mm(_mm(v, y), vt),
                              traceless=rho.traceless)


@dataclass(frozen=True)
class CycleSpec:
    """One evolution cycle: a double-quantum block of duration tau0 followed
    by a dipolar block of duration tau_sigma."""

    tau0: float
    tau_sigma: float
    mode: str = "effective"  # "effective" or "pulsed"

    def __post_init__(self):
        if self.tau0 < 0 or self.tau_sigma < 0 or self.tau0 + self.tau_sigma <= 0:
            raise MqcsimError("cycle durations must be nonnegative with positive total")
        if self.mode not in ("effective", "pulsed"):
            raise MqcsimError(f"unknown cycle mode {self.mode!r}")

    @property
    def tau_c(self) -> float:
        return self.tau0 + self.tau_sigma

    @property
    def p(self) -> float:
        return self.tau_sigma / self.tau_c


def cycle_unitary(spec: CycleSpec, H0: Operator, Hdd: Operator) -> Propagator:
    """Unitary for one cycle.

    pulsed:    U = exp(-i Hdd tau_sigma) exp(-i H0 tau0)
    effective: U = exp(-i [(1-p) H0 + p Hdd] tau_c)
    """
    if H0.space.dim != Hdd.space.dim:
        raise MqcsimError("Hamiltonians live on different spaces")
    if spec.mode == "pulsed":
        if spec.tau_sigma == 0.0:
            return propagator(H0, spec.tau0)
        if spec.tau0 == 0.0:
            return propagator(Hdd, spec.tau_sigma)
        u = _mm(propagator(Hdd, spec.tau_sigma).unitary,
                propagator(H0, spec.tau0).unitary)
        return Propagator(H0.space, unitary=u,
                          description=f"pulsed cycle {spec}")
    heff = Operator(H0.space,
                    (1.0 - spec.p) * H0.matrix + spec.p * Hdd.matrix,
                    hermitian=True)
    return propagator(heff, spec.tau_c)


def run_cycles(rho: DensityOperator, U_c: Propagator, N: int) -> DensityOperator:
    """Apply the cycle unitary N times (N = 0 returns the input)."""
    if N < 0:
        raise MqcsimError("cycle count must be nonnegative")
    for _ in range(N):
        rho = U_c.apply(rho)
    return rho
