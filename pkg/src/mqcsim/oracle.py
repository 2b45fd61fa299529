"""Brute-force reference implementations used to validate the main path.

Nothing here shares linear-algebra code with the other modules: spectra are
accumulated with explicit Python loops over basis pairs, the matrix
exponential is a scaling-and-squaring Taylor series, and the two-spin
dynamics is a pinned closed form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MqcsimError

SPECTRUM_MAX_SPINS = 8
EXP_MAX_SPINS = 6


@dataclass(frozen=True)
class OracleReport:
    """Comparison between a main-path value and its oracle counterpart."""

    quantity: str
    main_value: float
    oracle_value: float
    deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.deviation <= self.tolerance

    def __str__(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag}  {self.quantity:<40s} dev={self.deviation:.3e} "
                f"tol={self.tolerance:.1e}")


def _popcount_mz(index: int, n: int) -> float:
    return bin(index).count("1") - n / 2.0


def oracle_spectrum(rho_ref: np.ndarray, rho_actual: np.ndarray, n: int) -> dict:
    """A(dM) by explicit double loop over basis pairs.

    Returns a dict dM -> amplitude over dM in -n..n.
    """
    if n > SPECTRUM_MAX_SPINS:
        raise MqcsimError(f"oracle_spectrum capped at n={SPECTRUM_MAX_SPINS}")
    dim = 2**n
    amps = {dm: 0.0 for dm in range(-n, n + 1)}
    for b in range(dim):
        for bp in range(dim):
            dm = round(_popcount_mz(b, n) - _popcount_mz(bp, n))
            amps[dm] += (np.conj(rho_ref[b, bp]) * rho_actual[b, bp]).real
    return amps


def oracle_two_spin(d: float, t: float):
    """Closed-form two-spin evolution of the thermal state under the
    double-quantum Hamiltonian with coupling d.

    Only the |both-down>, |both-up> sector moves; the 2x2 block
    diagonalization gives
        rho_downdown(t) = -cos(d t) / 2,   rho_upup(t) = +cos(d t) / 2,
        rho_{upup,downdown}(t) = -i sin(d t) / 2,
    and the coherence-order amplitudes
        A(0) = cos^2(d t) / 2,   A(+-2) = sin^2(d t) / 4.
    The first maximum of A(+-2) sits at t = pi / (2 |d|).

    Returns (rho, spectrum_dict) with rho a 4x4 array in the standard bit
    order (index 0 = both down, 3 = both up).
    """
    c, s = np.cos(d * t), np.sin(d * t)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = -c / 2.0
    rho[3, 3] = +c / 2.0
    rho[3, 0] = -1j * s / 2.0
    rho[0, 3] = +1j * s / 2.0
    spectrum = {0: c * c / 2.0, 2: s * s / 4.0, -2: s * s / 4.0,
                1: 0.0, -1: 0.0}
    return rho, spectrum


def two_spin_first_maximum(d: float) -> float:
    """Time of the first maximum of A(+-2) for coupling d."""
    return np.pi / (2.0 * abs(d))


def oracle_matrix_exp(H: np.ndarray, t: float, n: int = None) -> np.ndarray:
    """exp(-i H t) by scaling-and-squaring Taylor series.

    Independent of the eigendecomposition path used by the main modules.
    """
    H = np.asarray(H, dtype=complex)
    if n is None:
        n = int(round(np.log2(H.shape[0])))
    if n > EXP_MAX_SPINS:
        raise MqcsimError(f"oracle_matrix_exp capped at n={EXP_MAX_SPINS}")
    a = -1j * t * H
    norm = np.abs(a).sum(axis=1).max()  # induced infinity norm
    s = max(0, int(np.ceil(np.log2(norm / 0.5))) if norm > 0.5 else 0)
    a = a / 2**s
    out = np.eye(H.shape[0], dtype=complex)
    term = np.eye(H.shape[0], dtype=complex)
    k = 1
    while True:
        term = term @ a / k
        out = out + term
        if np.abs(term).max() < 1e-18:
            break
        k += 1
        if k > 200:
            raise MqcsimError("matrix exponential series failed to converge")
    for _ in range(s):
        out = out @ out
    return out
