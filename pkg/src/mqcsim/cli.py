"""Command-line entry point.

Subcommands: lattice, grow, perturb, echo, equilibrium, sweep, selftest.
All physics parameters live in the config file; ``--set section.key=value``
overrides individual keys for sweeps.  Data goes to files and one-line
stdout summaries; progress goes to stderr.

Exit codes: 0 success, 2 config error, 3 resource cap exceeded,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, geometry
from .config import parse_config, render_config
from .errors import ConfigError, DimensionCapError, InvariantError, MqcsimError
from .experiments import (ExperimentConfig, build_sites, echo_csv, echo_decay,
                          equilibrium_experiment, fit_powerlaw, growth_csv,
                          growth_experiment, ksat_csv, perturbed_growth,
                          resolve_orientations, spectra_csv, stationary_size)
from .hilbert import HilbertSpace, build_H0, thermal_state
from .mqc import phase_grid, phase_encoded_signal, spectrum_direct, \
    spectrum_from_signal
from .oracle import (OracleReport, oracle_matrix_exp, oracle_spectrum,
                     oracle_two_spin)
from .seeds import derive_seed

OUTPUT_ENV = "MQCSIM_OUTPUT_ROOT"


def _progress(msg: str) -> None:
    print(msg, file=sys.stderr)


class _OutputDir:
    """Collects emitted files and writes the manifest last."""

    def __init__(self, path: Path, cfg: ExperimentConfig = None, command: str = ""):
        self.path = path
        self.cfg = cfg
        self.command = command
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        self.files = {}
        path.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> None:
        data = text.encode()
        (self.path / name).write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()

    def finish(self, extra: dict = None) -> None:
        manifest = {
            "tool": "mqcsim",
            "version": __version__,
            "command": self.command,
            "seed": self.cfg.seed if self.cfg else None,
            "started": self.started,
            "finished": datetime.datetime.now(datetime.timezone.utc).isoformat(),
            "files": dict(sorted(self.files.items())),
        }
        if extra:
            manifest.update(extra)
        (self.path / "manifest.json").write_text(
            json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _outdir(args, command: str, cfg=None) -> _OutputDir:
    base = Path(args.output) if args.output else Path(f"mqcsim-out/{command}")
    root = os.environ.get(OUTPUT_ENV)
    if root:
        base = Path(root) / base
    return _OutputDir(base, cfg, command)


def _load(args) -> ExperimentConfig:
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {args.config}: {exc}")
    return parse_config(text, args.set or ())


def cmd_lattice(args) -> int:
    cfg = _load(args)
    out = _outdir(args, "lattice", cfg)
    sites = build_sites(cfg.geometry, cfg.max_spins)
    prefactor = (geometry.nn_prefactor(sites, cfg.geometry.nn_coupling)
                 if sites.n > 1 else 1.0)
    angles = resolve_orientations(cfg)[0]
    table = geometry.couplings(sites, angles, prefactor, cfg.geometry.cutoff)
    out.write("sites.txt", sites.to_text())
    out.write("couplings.txt", table.to_text())
    out.write("config.echo", render_config(cfg))
    out.finish()
    print(f"lattice: {sites.n} sites, {len(table.entries)} pair rows -> {out.path}")
    return 0


def _write_growth(out: _OutputDir, cfg: ExperimentConfig, curves) -> None:
    out.write("growth.csv", growth_csv(curves))
    out.write("spectra.csv", spectra_csv(curves))
    out.write("config.echo", render_config(cfg))
    out.finish()
    for c in curves:
        k_tail = c.estimates[-1].K if c.estimates else float("nan")
        print(f"p={c.p} K0={c.k0:.3g} final K={k_tail:.3g} -> {out.path}")


def cmd_grow(args) -> int:
    cfg = _load(args)
    out = _outdir(args, "grow", cfg)
    _progress(f"grow: n={cfg.geometry.sites}, schedule={list(cfg.schedule)}")
    curve = growth_experiment(cfg)
    _write_growth(out, cfg, [curve])
    return 0


def cmd_perturb(args) -> int:
    cfg = _load(args)
    out = _outdir(args, "perturb", cfg)
    _progress(f"perturb: n={cfg.geometry.sites}, p={list(cfg.p_values)}")
    curves = perturbed_growth(cfg)
    _write_growth(out, cfg, curves)
    return 0


def cmd_equilibrium(args) -> int:
    cfg = _load(args)
    out = _outdir(args, "equilibrium", cfg)
    _progress(f"equilibrium: n0={cfg.n0}, p={list(cfg.p_values)}")
    curves = equilibrium_experiment(cfg)
    _write_growth(out, cfg, curves)
    return 0


def cmd_echo(args) -> int:
    cfg = _load(args)
    out = _outdir(args, "echo", cfg)
    _progress(f"echo: error={cfg.error.kind} strength={cfg.error.strength}")
    curve = echo_decay(cfg)
    out.write("echo.csv", echo_csv(curve))
    out.write("config.echo", render_config(cfg))
    out.finish()
    print(f"echo: E ranges {curve.e_values.min():.4f}..{curve.e_values.max():.4f} "
          f"-> {out.path}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if len(cfg.p_values) < 2:
        raise ConfigError("sweep needs at least two p values")
    out = _outdir(args, "sweep", cfg)
    _progress(f"sweep: p={list(cfg.p_values)}")
    curves = perturbed_growth(cfg)
    rows = [(c.p, stationary_size(c, cfg.tail_window)) for c in curves]
    out.write("ksat.csv", ksat_csv(rows))
    out.write("growth.csv", growth_csv(curves))
    out.write("spectra.csv", spectra_csv(curves))
    out.write("config.echo", render_config(cfg))
    converged = [(p, est) for p, est in rows if est.converged and p > 0]
    extra = {}
    if len(converged) >= 2:
        slope, stderr = fit_powerlaw([p for p, _ in converged],
                                     [est.mean for _, est in converged])
        out.write("slope.csv", f"slope,stderr\n{slope!r},{stderr!r}\n")
        extra["slope"] = slope
        print(f"sweep: log-log slope of K_sat vs p = {slope:.3f} +- {stderr:.3f}")
    else:
        print("sweep: slope withheld (fewer than two converged p > 0 curves)")
    out.finish(extra)
    return 0


def cmd_selftest(args) -> int:
    """Quick oracle-equivalence checks; prints one report line each."""
    reports = []
    rng = np.random.default_rng(derive_seed(12345, "selftest", 0))

    # direct spectrum vs brute-force double loop on random Hermitian pairs
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        space = HilbertSpace(n)
        dim = space.dim

        def herm():
            m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
            m = m + m.conj().T
            m = m - np.trace(m) / dim * np.eye(dim)
            from .hilbert import DensityOperator
            return DensityOperator(space, m, traceless=True)

        a, b = herm(), herm()
        main = spectrum_direct(a, b)
        ref = oracle_spectrum(a.matrix, b.matrix, n)
        dev = max(abs(main.amplitude(dm) - ref[dm]) for dm in ref)
        worst = max(worst, dev)
    reports.append(OracleReport("spectrum_direct vs double loop", 0.0, 0.0,
                                worst, 1e-12))

    # protocol round trip vs closed-form two-spin dynamics
    from .evolve import propagator
    from .geometry import build_chain, couplings
    space = HilbertSpace(2)
    table = couplings(build_chain(1.0, 2, axis=(1.0, 0.0, 0.0)))
    h0 = build_H0(table, space)
    d = table.entries[(0, 1)]
    rho0 = thermal_state(space)
    phis = phase_grid(2)
    worst = 0.0
    iz2 = space.n * space.dim / 4.0  # signal units -> overlap units
    for t in np.linspace(0.0, 6.0, 25):
        state = propagator(h0, t).apply(rho0)
        sig = phase_encoded_signal(state, propagator(h0, -t), phis)
        spec = spectrum_from_signal(sig, 2).scaled(1.0 / iz2)
        _, ref = oracle_two_spin(d, t)
        dev = max(abs(spec.amplitude(dm) - ref[dm]) for dm in ref)
        worst = max(worst, dev)
    reports.append(OracleReport("phase protocol vs two-spin closed form",
                                0.0, 0.0, worst, 1e-9))

    # eigendecomposition propagator vs series exponential
    worst = 0.0
    for _ in range(10):
        n = 4
        space = HilbertSpace(n)
        m = rng.standard_normal((space.dim, space.dim))
        m = m + m.T
        from .hilbert import Operator
        h = Operator(space, m, hermitian=True)
        u_main = propagator(h, 0.7).unitary
        u_ref = oracle_matrix_exp(m, 0.7, n)
        worst = max(worst, float(np.abs(u_main - u_ref).max()))
    reports.append(OracleReport("eigen propagator vs series exponential",
                                0.0, 0.0, worst, 1e-11))

    ok = True
    for r in reports:
        print(r)
        ok = ok and r.passed
    if not ok:
        raise InvariantError("selftest failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mqcsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_config in [
        ("lattice", cmd_lattice, True),
        ("grow", cmd_grow, True),
        ("perturb", cmd_perturb, True),
        ("echo", cmd_echo, True),
        ("equilibrium", cmd_equilibrium, True),
        ("sweep", cmd_sweep, True),
        ("selftest", cmd_selftest, False),
    ]:
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("config", help="path to the INI config file")
            p.add_argument("--output", help="output directory")
            p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                           help="override a config key")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DimensionCapError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return 3
    except (InvariantError, MqcsimError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
