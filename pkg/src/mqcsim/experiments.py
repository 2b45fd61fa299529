"""End-to-end experiments: cluster growth, perturbed growth / localization,
Loschmidt-echo decay, and dynamic equilibrium from prepared cluster sizes.

Ensemble averaging order: coherence-order spectra are averaged across
orientations (and error realizations) first, then a single cluster-size fit
is made on the mean spectrum, mirroring an ensemble-detected signal.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import DEFAULT_MAX_SPINS
from .errors import ConfigError, MqcsimError
from .evolve import CycleSpec, cycle_unitary, evolve_under, propagator, run_cycles
from .hilbert import (DensityOperator, HilbertSpace, Operator, build_H0,
                      build_Hdd, thermal_state)
from .mqc import (ClusterEstimate, MqcSpectrum, fit_cluster_size, phase_grid,
                  phase_encoded_signal, spectrum_from_signal)
from .seeds import derive_seed


@dataclass(frozen=True)
class GeometrySpec:
    kind: str = "fcc"              # "fcc" or "chain"
    sites: int = 12
    lattice_constant: float = 1.0  # fcc
    spacing: float = 1.0           # chain
    nn_coupling: float = 1.0       # target coupling scale at the nn distance
    cutoff: float = math.inf

    def __post_init__(self):
        if self.kind not in ("fcc", "chain"):
            raise ConfigError(f"unknown geometry kind {self.kind!r}")
        if self.sites < 1:
            raise ConfigError("geometry.sites must be at least 1")


@dataclass(frozen=True)
class OrientationSpec:
    mode: str = "single"           # "single" or "powder"
    angles: tuple = (0.0, 0.0, 0.0)
    count: int = 1                 # powder orientations

    def __post_init__(self):
        if self.mode not in ("single", "powder"):
            raise ConfigError(f"unknown orientation mode {self.mode!r}")
        if self.mode == "powder" and self.count < 1:
            raise ConfigError("powder orientation count must be at least 1")


@dataclass(frozen=True)
class ErrorSpec:
    kind: str = "none"             # "none", "zfield" or "coupling"
    strength: float = 0.0
    ensemble: int = 1              # realizations to average

    def __post_init__(self):
        if self.kind not in ("none", "zfield", "coupling"):
            raise ConfigError(f"unknown error kind {self.kind!r}")
        if self.ensemble < 1:
            raise ConfigError("error ensemble must be at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: GeometrySpec = GeometrySpec()
    orientation: OrientationSpec = OrientationSpec()
    p_values: tuple = (0.0,)
    schedule: tuple = (1, 2, 4, 8)   # cycle counts N to sample
    n0: int = 0                      # preparation cycles under pure H0
    tau_c: float = 0.5               # cycle duration, 1 / nn-coupling units
    mode: str = "effective"          # "effective" or "pulsed"
    normalization: str = "raw"       # "raw" or "unit-sum"
    error: ErrorSpec = ErrorSpec()
    seed: int = 0
    tail_window: float = 0.25
    workers: int = 1
    max_spins: int = DEFAULT_MAX_SPINS

    def __post_init__(self):
        for p in self.p_values:
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"p={p} outside [0, 1]")
        if list(self.schedule) != sorted(set(self.schedule)) or \
                any(n < 0 for n in self.schedule):
            raise ConfigError("schedule must be strictly increasing and nonnegative")
        if self.n0 < 0:
            raise ConfigError("n0 must be nonnegative")
        if self.tau_c <= 0:
            raise ConfigError("tau_c must be positive")
        if self.mode not in ("effective", "pulsed"):
            raise ConfigError(f"unknown evolution mode {self.mode!r}")
        if self.normalization not in ("raw", "unit-sum"):
            raise ConfigError(f"unknown normalization {self.normalization!r}")
        if not 0.0 < self.tail_window <= 1.0:
            raise ConfigError("tail_window must be in (0, 1]")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")


@dataclass
class GrowthCurve:
    """Cluster size vs time for one perturbation strength."""

    p: float
    k0: float
    cycles: tuple
    times: tuple                 # N * tau_c
    estimates: list              # ClusterEstimate per point
    spectra: list                # averaged MqcSpectrum per point
    k0_estimate: ClusterEstimate = None

    @property
    def k_values(self) -> np.ndarray:
        return np.array([e.K for e in self.estimates])


@dataclass
class EchoCurve:
    """Time-reversal echo E(N), normalized to E(0) = 1."""

    cycles: tuple
    times: tuple                 # N * tau0
    e_values: np.ndarray

    def __post_init__(self):
        self.e_values = np.asarray(self.e_values, dtype=float)
        if self.cycles and self.cycles[0] == 0:
            if abs(self.e_values[0] - 1.0) > 1e-9:
                raise MqcsimError("echo curve not normalized to E(0) = 1")


@dataclass(frozen=True)
class StationaryEstimate:
    mean: float
    spread: float               # peak-to-peak over the tail window
    converged: bool
    points: int


def build_sites(geom: GeometrySpec, max_spins: int) -> geometry.SiteSet:
    if geom.kind == "fcc":
        return geometry.build_fcc(geom.lattice_constant, geom.sites, max_spins)
    return geometry.build_chain(geom.spacing, geom.sites, max_spins=max_spins)


def resolve_orientations(cfg: ExperimentConfig) -> list:
    if cfg.orientation.mode == "single":
        return [tuple(cfg.orientation.angles)]
    return geometry.powder_orientations(
        cfg.orientation.count, derive_seed(cfg.seed, "powder", 0))


class _OrientationRun:
    """All operators for one crystal orientation, built once."""

    def __init__(self, cfg: ExperimentConfig, sites: geometry.SiteSet,
                 angles: tuple):
        self.cfg = cfg
        self.space = HilbertSpace(sites.n, cfg.max_spins)
        prefactor = (geometry.nn_prefactor(sites, cfg.geometry.nn_coupling)
                     if sites.n > 1 else 1.0)
        self.table = geometry.couplings(sites, angles, prefactor,
                                        cfg.geometry.cutoff)
        self.h0 = build_H0(self.table, self.space)
        self.hdd = build_Hdd(self.table, self.space)
        self.rho0 = thermal_state(self.space)
        self.phis = phase_grid(self.space.n)

    def heff(self, p: float) -> Operator:
        if p == 0.0:
            return self.h0   # shares the cached eigendecomposition
        return Operator(self.space,
                        (1.0 - p) * self.h0.matrix + p * self.hdd.matrix,
                        hermitian=True)

    def _forward_states(self, h_fwd: Operator, rho_prep: DensityOperator,
                        schedule, tau_c: float, p: float):
        if self.cfg.mode == "effective":
            yield from evolve_under(h_fwd, rho_prep,
                                    [n * tau_c for n in schedule])
        else:
            # pulsed mode: concatenate explicit H0 / Hdd blocks
            tau0 = tau_c * (1.0 - p)
            spec = CycleSpec(tau0=tau0, tau_sigma=tau_c - tau0, mode="pulsed")
            u_c = cycle_unitary(spec, self.h0, self.hdd)
            rho = rho_prep
            prev = 0
            for n in schedule:
                rho = run_cycles(rho, u_c, n - prev)
                prev = n
                yield rho

    def protocol_spectra(self, p: float, n0: int, schedule):
        """Averaged-signal MQC spectra along the schedule, plus the
        preparation-time spectrum used for K0."""
        cfg = self.cfg
        tau_c = cfg.tau_c
        tau0 = (1.0 - p) * tau_c
        h_fwd = self.heff(p)
        if n0 > 0:
            rho_prep = propagator(self.h0, n0 * tau0).apply(self.rho0)
        else:
            rho_prep = self.rho0
        u_back0 = propagator(self.h0, -(n0 * tau0))
        sig = phase_encoded_signal(rho_prep, u_back0, self.phis)
        k0_spec = spectrum_from_signal(sig, self.space.n,
                                       metadata={"p": p, "N": 0, "n0": n0})
        spectra = []
        states = self._forward_states(h_fwd, rho_prep, schedule, tau_c, p)
        for n, rho_t in zip(schedule, states):
            u_back = propagator(self.h0, -((n + n0) * tau0))
            sig = phase_encoded_signal(rho_t, u_back, self.phis)
            spectra.append(spectrum_from_signal(
                sig, self.space.n,
                metadata={"p": p, "N": n, "n0": n0, "t": n * tau_c}))
        return k0_spec, spectra

    def error_hamiltonian(self, seed: int) -> np.ndarray:
        """One realization of the configured error term (Zeeman basis matrix)."""
        spec = self.cfg.error
        rng = np.random.default_rng(seed)
        if spec.kind == "zfield":
            h = rng.normal(0.0, spec.strength, self.space.n)
            b = np.arange(self.space.dim, dtype=np.int64)
            diag = np.zeros(self.space.dim)
            for i in range(self.space.n):
                diag += h[i] * (((b >> i) & 1) - 0.5)
            return np.diag(diag)
        if spec.kind == "coupling":
            eps = {pair: spec.strength * rng.standard_normal() * d
                   for pair, d in self.table.entries.items()}
            delta = geometry.CouplingTable(
                n_sites=self.table.n_sites, entries=eps,
                prefactor=self.table.prefactor, orientation=self.table.orientation)
            return build_H0(delta, self.space).matrix
        return np.zeros((self.space.dim, self.space.dim))


def _fit(spec: MqcSpectrum) -> ClusterEstimate:
    return fit_cluster_size(spec)


def _averaged_curves(cfg: ExperimentConfig, p_values, n0: int) -> list:
    sites = build_sites(cfg.geometry, cfg.max_spins)
    orientations = resolve_orientations(cfg)
    sums = {p: None for p in p_values}
    k0_sums = {p: None for p in p_values}
    for angles in orientations:
        run = _OrientationRun(cfg, sites, angles)
        for p in p_values:
            k0_spec, spectra = run.protocol_spectra(p, n0, cfg.schedule)
            if sums[p] is None:
                sums[p] = [[s] for s in spectra]
                k0_sums[p] = [k0_spec]
            else:
                for acc, s in zip(sums[p], spectra):
                    acc.append(s)
                k0_sums[p].append(k0_spec)
        del run
    curves = []
    for p in p_values:
        spectra = [MqcSpectrum.average(acc) for acc in sums[p]]
        k0_spec = MqcSpectrum.average(k0_sums[p])
        if cfg.normalization == "unit-sum":
            spectra = [s.unit_sum() for s in spectra]
            k0_spec = k0_spec.unit_sum()
        estimates = [_fit(s) for s in spectra]
        k0_est = _fit(k0_spec)
        curves.append(GrowthCurve(
            p=p, k0=k0_est.K, cycles=tuple(cfg.schedule),
            times=tuple(n * cfg.tau_c for n in cfg.schedule),
            estimates=estimates, spectra=spectra, k0_estimate=k0_est))
    return curves


def growth_experiment(cfg: ExperimentConfig) -> GrowthCurve:
    """Unperturbed cluster growth under the double-quantum Hamiltonian."""
    return _averaged_curves(cfg, [0.0], n0=0)[0]


def perturbed_growth(cfg: ExperimentConfig) -> list:
    """Growth curves for every configured perturbation strength."""
    if not cfg.p_values:
        raise ConfigError("perturbed_growth needs at least one p value")
    return _averaged_curves(cfg, list(cfg.p_values), n0=0)


def equilibrium_experiment(cfg: ExperimentConfig) -> list:
    """Perturbed evolution from a prepared initial cluster size K0
    (n0 preparation cycles under pure H0)."""
    return _averaged_curves(cfg, list(cfg.p_values), n0=cfg.n0)


def echo_decay(cfg: ExperimentConfig) -> EchoCurve:
    """Loschmidt-echo decay E(N) = Tr{rho_fwd rho_bwd} / Tr{rho0^2} with
    H_fwd = H_eff + H_e (forward, N tau_c) and H_bwd = -H0 + H_e'
    (backward, N tau0); both error terms drawn independently per realization."""
    p = cfg.p_values[0] if cfg.p_values else 0.0
    sites = build_sites(cfg.geometry, cfg.max_spins)
    orientations = resolve_orientations(cfg)
    tau_c = cfg.tau_c
    tau0 = (1.0 - p) * tau_c
    schedule = list(cfg.schedule)

    def one(run: _OrientationRun, idx: int) -> np.ndarray:
        h_e = run.error_hamiltonian(derive_seed(cfg.seed, "echo-fwd", idx))
        h_ep = run.error_hamiltonian(derive_seed(cfg.seed, "echo-bwd", idx))
        h_fwd = Operator(run.space, run.heff(p).matrix + h_e, hermitian=True)
        h_ref = Operator(run.space, run.h0.matrix - h_ep, hermitian=True)
        fwd = evolve_under(h_fwd, run.rho0, [n * tau_c for n in schedule])
        bwd = evolve_under(h_ref, run.rho0, [n * tau0 for n in schedule])
        purity = run.rho0.purity()
        out = np.empty(len(schedule))
        for k, (a, b) in enumerate(zip(fwd, bwd)):
            out[k] = np.real(np.vdot(b.matrix, a.matrix)) / purity
        return out

    totals = np.zeros(len(schedule))
    count = 0
    for oi, angles in enumerate(orientations):
        run = _OrientationRun(cfg, sites, angles)
        indices = [oi * cfg.error.ensemble + r for r in range(cfg.error.ensemble)]
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(lambda i: one(run, i), indices))
        else:
            results = [one(run, i) for i in indices]
        for r in results:
            totals += r
            count += 1
        del run
    e_vals = totals / count
    return EchoCurve(cycles=tuple(schedule),
                     times=tuple(n * tau0 for n in schedule),
                     e_values=e_vals)


def stationary_size(curve: GrowthCurve, window: float = 0.25) -> StationaryEstimate:
    """Mean and peak-to-peak spread of K over the tail window of a curve.
    Converged when the spread is below 10% of the mean."""
    k = curve.k_values
    if len(k) < 4:
        raise MqcsimError("stationary_size needs at least 4 points")
    n_tail = max(4, int(math.ceil(window * len(k))))
    tail = k[-n_tail:]
    mean = float(tail.mean())
    spread = float(tail.max() - tail.min())
    return StationaryEstimate(mean=mean, spread=spread,
                              converged=bool(spread < 0.10 * mean),
                              points=len(tail))


def fit_powerlaw(p_values, k_sats):
    """Log-log slope of K_sat vs p with its standard error."""
    x = np.log(np.asarray(p_values, dtype=float))
    y = np.log(np.asarray(k_sats, dtype=float))
    if len(x) < 2:
        raise MqcsimError("need at least two points for a slope")
    coeffs, cov = np.polyfit(x, y, 1, cov=True) if len(x) > 2 else (
        np.polyfit(x, y, 1), None)
    slope = float(coeffs[0])
    stderr = float(np.sqrt(cov[0, 0])) if cov is not None else 0.0
    return slope, stderr


def growth_csv(curves) -> str:
    lines = ["p,K0,N,t,K,sigma,residual,converged"]
    for c in curves:
        for n, t, est in zip(c.cycles, c.times, c.estimates):
            lines.append(
                f"{float(c.p)!r},{float(c.k0)!r},{n},{float(t)!r},"
                f"{float(est.K)!r},{float(est.sigma)!r},"
                f"{float(est.fit_residual)!r},{not est.below_resolution}")
    return "\n".join(lines) + "\n"


def spectra_csv(curves) -> str:
    lines = ["p,N,dM,A"]
    for c in curves:
        for n, spec in zip(c.cycles, c.spectra):
            for dm, a in zip(spec.orders, spec.amplitudes):
                lines.append(f"{float(c.p)!r},{n},{int(dm)},{float(a)!r}")
    return "\n".join(lines) + "\n"


def echo_csv(curve: EchoCurve) -> str:
    lines = ["N,t,E"]
    for n, t, e in zip(curve.cycles, curve.times, curve.e_values):
        lines.append(f"{n},{float(t)!r},{float(e)!r}")
    return "\n".join(lines) + "\n"


def ksat_csv(rows) -> str:
    """rows: iterable of (p, StationaryEstimate)."""
    lines = ["p,K_sat,spread,converged"]
    for p, est in rows:
        lines.append(f"{float(p)!r},{float(est.mean)!r},"
                     f"{float(est.spread)!r},{est.converged}")
    return "\n".join(lines) + "\n"
