# Oracles: the rate field against direct arithmetic on its formula, the
# transfer against quadrature sums, and the coupled stepper against the
# single-species solver in the decoupled limit.

import numpy as np
import pytest

from ridk.mesh import TWO_PI, build_interval, build_torus2d
from ridk.fespace import PairSpace, Quadrature, StatePair, interpolate, total_mass
from ridk.multispecies import (CouplingParams, TwoSpeciesState,
                               TwoSpeciesStepper, reaction_rate_field,
                               run_two_species, step_two_species)
from ridk.noise import (CounterStream, VonMisesSpectrum, sample_increment,
                        truncation_set)
from ridk.solver import Base, RidkParams, RidkState, Stepper, TimeScaleSwitch, run


SEVEN = CouplingParams(kappa=0.2, radius=0.15, n_particles=5000, rho_th=0.012)


def quiet_params(gamma=0.5, kbt=0.125):
    return RidkParams(gamma, 0.0, 0.1, 5e3, kbt=kbt)


def noisy_params():
    return RidkParams(0.3, 0.2, 0.3, 5e3)


def bump(center, width, mass):
    def f(*xy):
        x = xy[0] if len(xy) == 1 else xy[0]
        sq = sum((np.minimum(np.abs(c - m), TWO_PI - np.abs(c - m))) ** 2
                 for c, m in zip(xy, center))
        raw = np.exp(-sq / (2 * width ** 2))
        return mass * raw / ((2 * np.pi) ** (len(xy) / 2) * width ** len(xy))
    return f


def zero_vec(*xy):
    if len(xy) == 1:
        return np.zeros_like(xy[0])
    return np.zeros(xy[0].shape + (2,))


class TestCouplingParams:
    def test_scale(self):
        assert np.isclose(SEVEN.scale, 0.2 * np.pi * 0.15 ** 2 * 5000,
                          rtol=1e-15)

    def test_validation(self):
        for bad in [dict(kappa=-1.0, radius=0.1, n_particles=10, rho_th=0.0),
                    dict(kappa=1.0, radius=-0.1, n_particles=10, rho_th=0.0),
                    dict(kappa=1.0, radius=0.1, n_particles=-10, rho_th=0.0),
                    dict(kappa=1.0, radius=0.1, n_particles=10, rho_th=-0.1)]:
            with pytest.raises(ValueError):
                CouplingParams(**bad)


class TestReactionRateField:
    def test_constant_fields_reference_value(self):
        # 0.2 * pi * 0.15^2 * 5000 * 0.1 * 0.1 = 0.225 pi
        ps = PairSpace(build_interval(16), 0)
        rho_a = interpolate(ps.rho, lambda x: np.full_like(x, 0.1))
        rho_b = interpolate(ps.rho, lambda x: np.full_like(x, 0.1))
        rate = reaction_rate_field(rho_a, rho_b, SEVEN)
        assert np.allclose(rate, 0.225 * np.pi, rtol=1e-12)

    def test_below_threshold_is_exactly_zero(self):
        ps = PairSpace(build_interval(16), 1)
        rho_a = interpolate(ps.rho, lambda x: np.full_like(x, 0.1))
        rho_b = interpolate(ps.rho, lambda x: np.full_like(x, 0.01))
        assert np.all(reaction_rate_field(rho_a, rho_b, SEVEN) == 0.0)

    def test_negative_density_clipped(self):
        ps = PairSpace(build_interval(16), 0)
        rho_a = interpolate(ps.rho, lambda x: np.full_like(x, -0.1))
        rho_b = interpolate(ps.rho, lambda x: np.full_like(x, 0.1))
        assert np.all(reaction_rate_field(rho_a, rho_b, SEVEN) == 0.0)

    def test_indicator_follows_pointwise_b_values(self):
        ps = PairSpace(build_interval(32), 1)
        rho_a = interpolate(ps.rho, lambda x: np.full_like(x, 0.2))
        rho_b = interpolate(ps.rho, lambda x: 0.012 + 0.05 * np.sin(x))
        rate = reaction_rate_field(rho_a, rho_b, SEVEN)
        quad = Quadrature(ps.mesh, 2 * ps.q + 2)
        vb = np.einsum('ei,iq->eq', rho_b.coeffs[ps.rho.element_dofs],
                       ps.rho.tabulate(quad.ref))
        assert np.all(rate[vb <= SEVEN.rho_th] == 0.0)
        assert np.all(rate[vb > SEVEN.rho_th] > 0.0)

    def test_matches_direct_formula_on_2d(self):
        ps = PairSpace(build_torus2d(4, 4), 0)
        rho_a = interpolate(ps.rho, lambda x, y: 0.1 + 0.05 * np.cos(x))
        rho_b = interpolate(ps.rho, lambda x, y: 0.1 + 0.05 * np.sin(y))
        rate = reaction_rate_field(rho_a, rho_b, SEVEN)
        quad = Quadrature(ps.mesh, 2)
        tab = ps.rho.tabulate(quad.ref)
        va = np.einsum('ei,iq->eq', rho_a.coeffs[ps.rho.element_dofs], tab)
        vb = np.einsum('ei,iq->eq', rho_b.coeffs[ps.rho.element_dofs], tab)
        want = SEVEN.scale * np.maximum(va, 0) * np.maximum(vb, 0) * \
            (vb > SEVEN.rho_th)
        assert np.array_equal(rate, want)

    def test_mesh_mismatch_rejected(self):
        pa = PairSpace(build_interval(8), 0)
        pb = PairSpace(build_interval(16), 0)
        rho_a = interpolate(pa.rho, lambda x: np.full_like(x, 0.1))
        rho_b = interpolate(pb.rho, lambda x: np.full_like(x, 0.1))
        with pytest.raises(ValueError):
            reaction_rate_field(rho_a, rho_b, SEVEN)


def make_state(ps, fa, fb):
    rho_a = interpolate(ps.rho, fa)
    rho_b = interpolate(ps.rho, fb)
    ja = interpolate(ps.j, zero_vec)
    return TwoSpeciesState(StatePair(rho_a, ja.copy()),
                           StatePair(rho_b, ja.copy()), 0.0, 0)


class TestTwoSpeciesState:
    def test_mismatched_spaces_rejected(self):
        pa = PairSpace(build_interval(8), 0)
        pb = PairSpace(build_interval(16), 0)
        a = pa.zero_pair()
        b = pb.zero_pair()
        with pytest.raises(ValueError):
            TwoSpeciesState(a, b, 0.0, 0)


class TestTransfer:
    def test_antisymmetric_and_sized_by_rate_integral(self):
        ps = PairSpace(build_interval(24), 0)
        params = quiet_params()
        dt = 1e-3
        st = make_state(ps, bump((2.0,), 0.7, 0.55), bump((4.0,), 0.7, 0.45))
        stp = TwoSpeciesStepper(ps, params, Base(), SEVEN, dt)
        rate = reaction_rate_field(st.pair_a.rho, st.pair_b.rho, SEVEN)
        new = stp.step(st)
        gain_b = total_mass(new.pair_b.rho) - total_mass(st.pair_b.rho)
        loss_a = total_mass(st.pair_a.rho) - total_mass(new.pair_a.rho)
        quad = Quadrature(ps.mesh, 2 * ps.q + 2)
        want = dt * np.sum(quad.weights * rate)
        assert want > 1e-6  # the configuration actually reacts
        assert abs(gain_b - want) < 1e-13
        assert abs(loss_a - gain_b) < 1e-14

    def test_no_reaction_below_threshold(self):
        ps = PairSpace(build_interval(24), 0)
        st = make_state(ps, bump((2.0,), 0.7, 0.55),
                        lambda x: np.full_like(x, 0.005))
        stp = TwoSpeciesStepper(ps, quiet_params(), Base(), SEVEN, 1e-3)
        new = stp.step(st)
        assert abs(total_mass(new.pair_b.rho)
                   - total_mass(st.pair_b.rho)) < 1e-14


class TestDecoupling:
    def test_zero_kappa_matches_single_species_step(self):
        ps = PairSpace(build_interval(16), 0)
        params = noisy_params()
        dt = 1e-3
        off = CouplingParams(0.0, 0.15, 5000, 0.012)
        st = make_state(ps, bump((2.0,), 0.8, 0.6), bump((4.0,), 0.8, 0.4))
        spectrum = VonMisesSpectrum(params.eps, 1)
        tset = truncation_set(params.eps, ps.mesh.h, 0.5)
        inc_a = sample_increment(spectrum, tset, dt, CounterStream(5, tag=0))
        inc_b = sample_increment(spectrum, tset, dt, CounterStream(5, tag=1))

        new = step_two_species(st, params, Base(), off, dt, inc_a, inc_b)
        single = Stepper(ps, params, Base(), dt)
        ref_a = single.step(RidkState(st.pair_a, 0.0, 0), increment=inc_a)
        ref_b = single.step(RidkState(st.pair_b, 0.0, 0), increment=inc_b)
        assert np.array_equal(new.pair_a.vector(), ref_a.pair.vector())
        assert np.array_equal(new.pair_b.vector(), ref_b.pair.vector())

    def test_zero_kappa_run_matches_solver_run(self):
        ps = PairSpace(build_interval(16), 0)
        params = noisy_params()
        off = CouplingParams(0.0, 0.15, 5000, 0.012)
        fa, fb = bump((2.0,), 0.8, 0.6), bump((4.0,), 0.8, 0.4)
        out = run_two_species(ps, params, Base(), off, (fa, zero_vec),
                              (fb, zero_vec), (1e-3, 0.02), seed=9)

        ref_a = run(ps, params, Base(), (fa, zero_vec), (1e-3, 0.02), seed=9)
        spectrum = VonMisesSpectrum(params.eps, 1)
        tset = truncation_set(params.eps, ps.mesh.h, 0.5)
        stream_b = CounterStream(9, tag=1)
        ref_b = run(ps, params, Base(), (fb, zero_vec), (1e-3, 0.02), seed=9,
                    noise_factory=lambda k, dt: sample_increment(
                        spectrum, tset, dt, stream_b))
        assert np.array_equal(out.a.final_state.pair.vector(),
                              ref_a.final_state.pair.vector())
        assert np.array_equal(out.b.final_state.pair.vector(),
                              ref_b.final_state.pair.vector())
        assert np.array_equal(out.a.mass, ref_a.mass)

    def test_identical_species_stay_identical_without_noise(self):
        ps = PairSpace(build_interval(16), 1)
        params = quiet_params()
        off = CouplingParams(0.0, 0.15, 5000, 0.012)
        f = bump((3.0,), 0.8, 0.5)
        out = run_two_species(ps, params, Base(), off, (f, zero_vec),
                              (f, zero_vec), (1e-3, 0.01), seed=3)
        assert np.array_equal(out.a.final_state.pair.vector(),
                              out.b.final_state.pair.vector())


class TestRunTwoSpecies:
    def test_mass_sum_conserved_2d_noisy(self):
        ps = PairSpace(build_torus2d(6, 6), 0)
        params = noisy_params()
        out = run_two_species(ps, params, TimeScaleSwitch(0.02), SEVEN,
                              (bump((4.5, 1.5), 0.8, 0.9),
                               zero_vec),
                              (bump((4.2, 5.0), 0.4, 0.1), zero_vec),
                              (1e-2, 0.05), seed=11)
        tot = out.a.mass + out.b.mass
        assert np.max(np.abs(tot - tot[0])) < 1e-12 * tot[0]
        # coupling actually transfers mass from A to B
        assert out.b.mass[-1] > out.b.mass[0] + 1e-6

    def test_species_noises_independent(self):
        ps = PairSpace(build_interval(16), 0)
        params = noisy_params()
        f = bump((3.0,), 0.8, 0.5)
        out = run_two_species(ps, params, Base(),
                              CouplingParams(0.0, 0.15, 5000, 0.012),
                              (f, zero_vec), (f, zero_vec), (1e-3, 0.01),
                              seed=3)
        assert not np.array_equal(out.a.final_state.pair.vector(),
                                  out.b.final_state.pair.vector())

    def test_snapshots_and_times(self):
        ps = PairSpace(build_interval(8), 0)
        out = run_two_species(ps, quiet_params(), Base(), SEVEN,
                              (bump((2.0,), 0.8, 0.6), zero_vec),
                              (bump((4.0,), 0.8, 0.4), zero_vec),
                              (1e-2, 0.04), seed=1,
                              snapshot_times=(0.02, 0.04))
        assert [t for t, _ in out.a.snapshots] == [0.02, 0.04]
        assert [t for t, _ in out.b.snapshots] == [0.02, 0.04]
        assert len(out.a.times) == 5
