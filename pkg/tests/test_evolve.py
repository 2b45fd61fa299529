import numpy as np
import pytest

from mqcsim.errors import MqcsimError
from mqcsim.evolve import (CycleSpec, cycle_unitary, evolve, evolve_under,
                           propagator, run_cycles)
from mqcsim.geometry import build_chain, couplings
from mqcsim.hilbert import (HilbertSpace, Operator, build_H0, build_Hdd,
                            build_Iz, rotation_z, thermal_state)
from mqcsim.oracle import oracle_matrix_exp

from conftest import random_traceless_hermitian


@pytest.fixture
def four_spin():
    space = HilbertSpace(4)
    table = couplings(build_chain(1.0, 4, axis=(1.0, 0.4, 0.0)))
    return {
        "space": space,
        "h0": build_H0(table, space),
        "hdd": build_Hdd(table, space),
        "rho0": thermal_state(space),
    }


class TestPropagator:
    def test_zero_time_identity(self, two_spin_ops):
        u = propagator(two_spin_ops["h0"], 0.0).unitary
        assert np.allclose(u, np.eye(4))

    def test_iz_generator_is_z_rotation(self):
        space = HilbertSpace(3)
        t = 0.83
        u = propagator(build_Iz(space), t).unitary
        assert np.allclose(u, rotation_z(space, t).matrix, atol=1e-14)

    def test_matches_series_exponential(self, two_spin_ops):
        h = two_spin_ops["h0"]
        for t in (0.1, 1.0, 3.7):
            u = propagator(h, t).unitary
            ref = oracle_matrix_exp(h.matrix, t, 2)
            assert np.abs(u - ref).max() < 1e-12

    def test_requires_hermitian(self):
        space = HilbertSpace(2)
        op = Operator(space, np.diag([1.0, 2.0, 3.0, 4.0]), hermitian=False)
        with pytest.raises(MqcsimError):
            propagator(op, 1.0)

    def test_inverse(self, two_spin_ops):
        u = propagator(two_spin_ops["h0"], 0.9)
        assert np.allclose(u.inverse().unitary, u.unitary.conj().T)


class TestEvolve:
    def test_identity_propagator(self, two_spin_ops):
        rho = two_spin_ops["rho0"]
        out = evolve(rho, propagator(two_spin_ops["h0"], 0.0))
        assert np.allclose(out.matrix, rho.matrix)

    def test_thermal_state_frozen_under_hdd(self, two_spin_ops):
        rho = two_spin_ops["rho0"]
        out = evolve(rho, propagator(two_spin_ops["hdd"], 2.3))
        assert np.abs(out.matrix - rho.matrix).max() < 1e-12

    def test_purity_preserved(self, four_spin):
        rng = np.random.default_rng(11)
        rho = random_traceless_hermitian(rng, four_spin["space"])
        before = rho.purity()
        after = evolve(rho, propagator(four_spin["h0"], 1.7)).purity()
        assert abs(after - before) < 1e-12 * before

    def test_energy_conserved(self, four_spin):
        h = four_spin["h0"]
        rho = four_spin["rho0"]
        e0 = np.trace(rho.matrix @ h.matrix).real
        for state in evolve_under(h, rho, [0.5, 1.5, 4.0]):
            e = np.trace(state.matrix @ h.matrix).real
            assert abs(e - e0) < 1e-12

    def test_evolve_under_matches_propagator(self, four_spin):
        h = four_spin["h0"]
        rho = four_spin["rho0"]
        times = [0.3, 1.1]
        lazy = list(evolve_under(h, rho, times))
        for t, state in zip(times, lazy):
            direct = propagator(h, t).apply(rho)
            assert np.abs(state.matrix - direct.matrix).max() < 1e-12

    def test_perfect_reversal(self, four_spin):
        h = four_spin["h0"]
        rho = four_spin["rho0"]
        t = 3.0
        fwd = propagator(h, t).apply(rho)
        back = propagator(h, -t).apply(fwd)
        assert np.linalg.norm(back.matrix - rho.matrix) < 1e-10

    def test_dimension_mismatch(self, two_spin_ops, four_spin):
        with pytest.raises(MqcsimError):
            propagator(four_spin["h0"], 1.0).apply(two_spin_ops["rho0"])


class TestCycleSpec:
    def test_derived_quantities(self):
        spec = CycleSpec(tau0=0.7, tau_sigma=0.3)
        assert spec.tau_c == pytest.approx(1.0)
        assert spec.p == pytest.approx(0.3)

    def test_validation(self):
        with pytest.raises(MqcsimError):
            CycleSpec(tau0=0.0, tau_sigma=0.0)
        with pytest.raises(MqcsimError):
            CycleSpec(tau0=-0.1, tau_sigma=0.5)
        with pytest.raises(MqcsimError):
            CycleSpec(tau0=1.0, tau_sigma=0.0, mode="bogus")


class TestCycleUnitary:
    def test_pure_h0_block(self, four_spin):
        spec = CycleSpec(tau0=0.4, tau_sigma=0.0, mode="pulsed")
        u = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"]).unitary
        ref = propagator(four_spin["h0"], 0.4).unitary
        assert np.abs(u - ref).max() < 1e-12
        spec_eff = CycleSpec(tau0=0.4, tau_sigma=0.0, mode="effective")
        u_eff = cycle_unitary(spec_eff, four_spin["h0"], four_spin["hdd"]).unitary
        assert np.abs(u_eff - ref).max() < 1e-12

    def test_pure_dipolar_block(self, four_spin):
        spec = CycleSpec(tau0=0.0, tau_sigma=0.4, mode="pulsed")
        u = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"]).unitary
        ref = propagator(four_spin["hdd"], 0.4).unitary
        assert np.abs(u - ref).max() < 1e-12

    def test_trotter_convergence(self, four_spin):
        # fixed total time and p: pulsed vs effective gap shrinks ~linearly
        # as the cycle time is halved (first-order product formula)
        total, p = 2.0, 0.4
        errs = []
        for n_cycles in (8, 16, 32):
            tau_c = total / n_cycles
            spec = CycleSpec(tau0=(1 - p) * tau_c, tau_sigma=p * tau_c,
                             mode="pulsed")
            u_c = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"]).unitary
            u_pulsed = np.linalg.matrix_power(u_c, n_cycles)
            eff = CycleSpec(tau0=(1 - p) * total, tau_sigma=p * total,
                            mode="effective")
            u_eff = cycle_unitary(eff, four_spin["h0"], four_spin["hdd"]).unitary
            errs.append(np.abs(u_pulsed - u_eff).max())
        for big, small in zip(errs, errs[1:]):
            assert 1.5 < big / small < 2.5


class TestRunCycles:
    def test_zero_cycles(self, four_spin):
        spec = CycleSpec(tau0=0.3, tau_sigma=0.2, mode="pulsed")
        u_c = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"])
        out = run_cycles(four_spin["rho0"], u_c, 0)
        assert out is four_spin["rho0"]

    def test_two_cycles_equal_double_evolve(self, four_spin):
        spec = CycleSpec(tau0=0.3, tau_sigma=0.2, mode="pulsed")
        u_c = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"])
        twice = run_cycles(four_spin["rho0"], u_c, 2)
        step = evolve(evolve(four_spin["rho0"], u_c), u_c)
        assert np.abs(twice.matrix - step.matrix).max() < 1e-12

    def test_reversibility(self, four_spin):
        spec = CycleSpec(tau0=0.3, tau_sigma=0.2, mode="pulsed")
        u_c = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"])
        fwd = run_cycles(four_spin["rho0"], u_c, 5)
        back = run_cycles(fwd, u_c.inverse(), 5)
        assert np.linalg.norm(back.matrix - four_spin["rho0"].matrix) < 1e-10

    def test_negative_count(self, four_spin):
        spec = CycleSpec(tau0=0.3, tau_sigma=0.2)
        u_c = cycle_unitary(spec, four_spin["h0"], four_spin["hdd"])
        with pytest.raises(MqcsimError):
            run_cycles(four_spin["rho0"], u_c, -1)
