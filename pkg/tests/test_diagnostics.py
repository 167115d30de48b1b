import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kpds.grid import Grid2D, SpectralField, forward_transform, quadrature
from kpds.models import ModelSpec, initial_data_ds
from kpds.integrators import DSSplitStepper, evolve
from kpds.diagnostics import (
    MassObserver,
    MassTrace,
    energy_ds,
    energy_kp,
    error_norm,
    mass,
    spectrum_profile,
)


class TestMass:
    def test_constant_field_area(self):
        g = Grid2D(nx=32, ny=32, lx=5.0, ly=5.0)
        v = forward_transform(np.ones(g.shape), g)
        assert mass(v) == pytest.approx((10 * np.pi) ** 2, rel=1e-13)

    def test_ds_gaussian(self):
        g = Grid2D(nx=256, ny=256, lx=5.0, ly=5.0)
        v = forward_transform(initial_data_ds(g, eta=1.0), g)
        assert mass(v) == pytest.approx(np.pi / 2, abs=1e-10)

    def test_global_phase_invariance(self):
        g = Grid2D(nx=64, ny=64, lx=5.0, ly=5.0)
        u = initial_data_ds(g, eta=1.0)
        m1 = mass(forward_transform(u, g))
        m2 = mass(forward_transform(u * np.exp(1.1j), g))
        assert abs(m2 - m1) <= 1e-15 * m1

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_parseval_equality(self, seed):
        g = Grid2D(nx=32, ny=16, lx=2.0, ly=3.0)
        u = np.random.default_rng(seed).standard_normal(g.shape)
        v = forward_transform(u, g)
        assert mass(v) == pytest.approx(quadrature(np.abs(u) ** 2, g), rel=1e-12)


class TestEnergies:
    def test_zero_state(self):
        g = Grid2D(nx=16, ny=16)
        z = SpectralField(g, np.zeros(g.shape, dtype=complex))
        assert energy_kp(z, ModelSpec.kp1(), g) == 0.0
        assert energy_ds(z, ModelSpec.ds2(), g) == 0.0

    def test_kp_single_harmonic(self):
        # u = sin x: dx^-1 dy u = 0 and the cubic term integrates to zero,
        # leaving (1/2) * area/2
        g = Grid2D(nx=64, ny=64, lx=5.0, ly=5.0)
        X, _ = g.mesh
        v = forward_transform(np.sin(X / 5.0 * 5.0), g)  # kx = 1 on lx = 5 grid
        want = 0.25 * (10 * np.pi) ** 2
        for model in (ModelSpec.kp1(), ModelSpec.kp2(epsilon=0.3)):
            assert energy_kp(v, model, g) == pytest.approx(want, rel=1e-10)

    def test_ds_energy_finite_on_gaussian(self):
        g = Grid2D(nx=64, ny=64, lx=5.0, ly=5.0)
        v = forward_transform(initial_data_ds(g, eta=1.0), g)
        e = energy_ds(v, ModelSpec.ds2(epsilon=0.1, rho=-1), g)
        assert np.isfinite(e)

    def test_ds_energy_drift_self_convergence(self):
        # drift of the (untraced) energy shrinks rapidly under step
        # refinement for a fourth-order run; tracked, no reference value
        g = Grid2D(nx=64, ny=64, lx=5.0, ly=5.0)
        model = ModelSpec.ds2(epsilon=0.5, rho=1)
        v0 = forward_transform(initial_data_ds(g, eta=1.0), g)
        e0 = energy_ds(v0, model, g)
        drifts = []
        for nt in (8, 16):
            r = evolve(v0, model, g, "etd_cm", nt=nt, t_max=0.2)
            drifts.append(abs(energy_ds(r.field, model, g) - e0))
        assert drifts[1] < drifts[0] / 4.0


class TestErrorNorm:
    def setup_method(self):
        self.g = Grid2D(nx=32, ny=32, lx=5.0, ly=5.0)
        u = initial_data_ds(self.g, eta=1.0)
        self.v = forward_transform(u, self.g)

    def test_identical_states(self):
        assert error_norm(self.v, self.v, self.v) == 0.0

    def test_doubled_state(self):
        v2 = SpectralField(self.g, 2.0 * self.v.coeffs)
        assert error_norm(v2, self.v, self.v) == pytest.approx(1.0, rel=1e-13)

    def test_synthetic_perturbation_amplitude(self):
        g = self.g
        u0 = initial_data_ds(g, eta=1.0)
        u0 = u0 / np.sqrt(quadrature(u0**2, g))  # unit L2 norm
        X, _ = g.mesh
        bump = np.sin(X / 5.0)
        bump = bump / np.sqrt(quadrature(bump**2, g))
        a = 3.7e-5
        v0 = forward_transform(u0, g)
        v_num = forward_transform(u0 + a * bump, g)
        assert error_norm(v_num, v0, v0) == pytest.approx(a, rel=1e-13)


class TestMassTrace:
    def test_first_value_exactly_zero(self):
        g = Grid2D(nx=32, ny=32, lx=5.0, ly=5.0)
        v0 = forward_transform(initial_data_ds(g, eta=1.0), g)
        obs = MassObserver(g, stride=4)
        evolve(v0, ModelSpec.ds2(epsilon=0.5), g, "strang2", nt=8, t_max=0.1,
               observers=(obs,))
        assert obs.trace.test_values[0] == 0.0
        assert len(obs.trace.times) == 3  # start + 2 strides

    def test_split_step_mass_invariance(self):
        # full splitting step conserves mass to rounding (criterion level 1e-13)
        g = Grid2D(nx=64, ny=64, lx=5.0, ly=5.0)
        model = ModelSpec.ds2(epsilon=0.1, rho=1)
        v = forward_transform(initial_data_ds(g, eta=1.0), g)
        s = DSSplitStepper(model, g, h=0.01, order=2)
        m0 = mass(v)
        out = SpectralField(g, s.step(v.coeffs.copy(), 0.0))
        assert abs(mass(out) - m0) <= 1e-13 * m0

    def test_csv_round_trip(self):
        tr = MassTrace(times=[0.0, 0.5], test_values=[0.0, 1.25e-9], m0=2.0)
        lines = tr.to_csv().strip().split("\n")
        assert lines[0] == "t,test"
        got = [tuple(map(float, ln.split(","))) for ln in lines[1:]]
        assert got == [(0.0, 0.0), (0.5, 1.25e-9)]


class TestSpectrumProfile:
    def test_band_limited_tail_is_zero(self):
        g = Grid2D(nx=64, ny=64, lx=1.0, ly=1.0)
        X, Y = g.mesh
        u = np.cos(3 * X) + 0.5 * np.sin(2 * Y)
        prof = spectrum_profile(forward_transform(u, g))
        assert np.all(prof.max_x[4:] < 1e-10 * prof.max_x.max())
        assert prof.resolved(floor=1e-10)

    def test_gaussian_monotone_decay(self):
        g = Grid2D(nx=128, ny=128, lx=5.0, ly=5.0)
        prof = spectrum_profile(forward_transform(initial_data_ds(g, 1.0), g))
        vals = prof.max_x
        above_floor = vals > 1e-13 * vals.max()
        decaying = vals[above_floor]
        assert np.all(np.diff(decaying) < 0)

    def test_under_resolved_flagged(self):
        g = Grid2D(nx=16, ny=16, lx=5.0, ly=5.0)
        prof = spectrum_profile(forward_transform(initial_data_ds(g, 1.0), g))
        assert not prof.resolved(floor=1e-10)

    def test_csv_schema(self):
        g = Grid2D(nx=16, ny=16, lx=5.0, ly=5.0)
        prof = spectrum_profile(forward_transform(initial_data_ds(g, 1.0), g))
        csvs = prof.to_csv()
        assert set(csvs) == {"kx", "ky"}
        assert csvs["kx"].startswith("shell_k,log10_max\n")
        assert len(csvs["kx"].strip().split("\n")) == 1 + 9
