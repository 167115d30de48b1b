import numpy as np
import pytest

from kpds.grid import Grid2D, forward_transform
from kpds.models import ModelSpec, initial_data_ds
from kpds.phi import DCRK_GAMMA, build_coeffs
from kpds.integrators import (
    BlowUpError,
    CompositeStepper,
    DSSplitStepper,
    ETDCoxMatthewsStepper,
    ETDHochbruckOstermannStepper,
    ETDKrogstadStepper,
    GaussIRK4Stepper,
    IFRK4Stepper,
    NoConvergenceError,
    SplitStepper,
    StepperConfig,
    UnsupportedSchemeError,
    evolve,
    make_stepper,
)

EXP_FAMILY = {
    "ifrk4": IFRK4Stepper,
    "etd_cm": ETDCoxMatthewsStepper,
    "etd_k": ETDKrogstadStepper,
    "etd_ho": ETDHochbruckOstermannStepper,
}


def rk4_step(f, v, t, h):
    """Classical RK4 oracle."""
    k1 = f(v, t)
    k2 = f(v + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(v + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(v + h * k3, t + h)
    return v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def forced_solution(lam, v0, t, forcing="sin"):
    """Closed form of v' = lam v + g(t) for g = sin or cos (variation of
    constants oracle, independent of any stepper)."""
    if forcing == "sin":
        alpha = -0.5j / (1j - lam)
        beta = 0.5j / (-1j - lam)
    else:
        alpha = 0.5 / (1j - lam)
        beta = 0.5 / (-1j - lam)
    c = v0 - alpha - beta
    return c * np.exp(lam * t) + alpha * np.exp(1j * t) + beta * np.exp(-1j * t)


def run_scalar(stepper, nt, t_max, v0=1.0 + 0.0j):
    v = np.array([v0])
    h = t_max / nt
    for k in range(nt):
        v = stepper.step(v, k * h)
    return complex(v[0])


def measure_slope(make, nts, lam, t_max=1.0, forcing="sin"):
    g = np.sin if forcing == "sin" else np.cos
    nonlin = lambda v, t: np.full_like(v, g(t))
    errs = []
    for nt in nts:
        s = make(np.array([lam], dtype=complex), nonlin, t_max / nt)
        got = run_scalar(s, nt, t_max)
        errs.append(abs(got - forced_solution(lam, 1.0, t_max, forcing)))
    a, _ = np.polyfit(np.log10(np.array(nts, float)), np.log10(errs), 1)
    return -a


class TestLinearExactness:
    def setup_method(self):
        rng = np.random.default_rng(7)
        self.L = 1j * rng.uniform(-30, 30, size=(8, 8))
        self.v = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        self.zero = lambda v, t: np.zeros_like(v)

    @pytest.mark.parametrize("name", sorted(EXP_FAMILY))
    def test_exponential_family(self, name):
        s = EXP_FAMILY[name](self.L, self.zero, 0.3)
        want = np.exp(0.3 * self.L) * self.v
        got = s.step(self.v, 0.0)
        assert np.max(np.abs(got - want)) <= 1e-15 * np.max(np.abs(want))

    @pytest.mark.parametrize("order,tol", [(2, 1e-15), (4, 4e-15)])
    def test_splitting_linear_only(self, order, tol):
        # Strang composes two unimodular factors, Yoshida four; each factor
        # is correctly rounded so the product drifts by a few ulp at most
        flow_a = lambda v, dt: np.exp(dt * self.L) * v
        flow_b = lambda v, dt: v
        s = SplitStepper(flow_a, flow_b, 0.3, order=order)
        want = np.exp(0.3 * self.L) * self.v
        got = s.step(self.v, 0.0)
        assert np.max(np.abs(got - want)) <= tol * np.max(np.abs(want))

    def test_unimodular_per_mode(self):
        s = IFRK4Stepper(self.L, self.zero, 0.17)
        assert np.max(np.abs(np.abs(s.e_full) - 1.0)) <= 1e-15


class TestRK4Reduction:
    """With L = 0 the one-step maps collapse to classical RK4."""

    def setup_method(self):
        self.v = np.array([0.3 - 0.2j, 1.1 + 0.4j])
        self.L = np.zeros(2, dtype=complex)
        self.nonlin = lambda v, t: np.cos(t) - v**3

    @pytest.mark.parametrize("name", ["ifrk4", "etd_cm", "etd_k"])
    def test_matches_classical_rk4(self, name):
        s = EXP_FAMILY[name](self.L, self.nonlin, 0.2)
        got = s.step(self.v, 0.1)
        want = rk4_step(self.nonlin, self.v, 0.1, 0.2)
        assert np.max(np.abs(got - want)) <= 1e-14 * np.max(np.abs(want))

    def test_dcrk_all_slow_reduces_exactly(self):
        L = np.array([-0.5j, 2.0j])
        s = CompositeStepper(L, self.nonlin, 0.2, tau=np.inf)
        full = lambda v, t: self.nonlin(v, t) + L * v
        got = s.step(self.v, 0.1)
        want = rk4_step(full, self.v, 0.1, 0.2)
        assert np.max(np.abs(got - want)) <= 1e-15 * np.max(np.abs(want))
        assert s.fast_fraction == 0.0

    def test_ho_weights_at_zero(self):
        c = build_coeffs("etd_ho", np.zeros(1, dtype=complex), 1.0)
        assert complex(c["b1"][0]) == pytest.approx(1 / 6, abs=1e-14)
        assert complex(c["b4"][0]) == pytest.approx(1 / 6, abs=1e-14)
        assert complex(c["b5"][0]) == pytest.approx(2 / 3, abs=1e-14)
        assert complex(c["a54"][0]) == pytest.approx(0.0, abs=1e-14)


class TestScalarOrders:
    """Fitted convergence slopes on v' = lam v + g(t) with the exact oracle."""

    def test_ifrk4_spec_probe(self):
        # h in 0.1 * 2^-k, forcing sin, lam = -1
        slope = measure_slope(IFRK4Stepper, (10, 20, 40, 80), -1.0)
        assert 3.9 <= slope <= 4.1

    @pytest.mark.parametrize("cls", [ETDCoxMatthewsStepper, ETDKrogstadStepper,
                                     ETDHochbruckOstermannStepper])
    def test_etd_schemes(self, cls):
        slope = measure_slope(cls, (10, 20, 40, 80), -1.0)
        assert 3.8 <= slope <= 4.2

    def test_etd_cm_stiff_probe(self):
        slope = measure_slope(ETDCoxMatthewsStepper, (64, 128, 256, 512), -50.0,
                              forcing="cos")
        assert 3.8 <= slope <= 4.2

    def test_dcrk_nonstiff(self):
        make = lambda L, n, h: CompositeStepper(L, n, h, tau=1.0)
        slope = measure_slope(make, (10, 20, 40, 80), -1.0)
        assert 3.8 <= slope <= 4.2

    def test_irk4(self):
        make = lambda L, n, h: GaussIRK4Stepper(L, n, h, fp_tolerance=1e-13)
        slope = measure_slope(make, (8, 16, 32, 64), -1.0)
        assert 3.8 <= slope <= 4.2

    def test_oscillatory_lam(self):
        slope = measure_slope(ETDKrogstadStepper, (10, 20, 40, 80), 2.0j)
        assert 3.8 <= slope <= 4.2


class TestComposite:
    def test_a_stability_single_fast_mode(self):
        L = np.array([-1.0e4 + 0.0j])
        s = CompositeStepper(L, lambda v, t: np.zeros_like(v), 1.0, tau=1.0)
        v = np.array([1.0 + 0.0j])
        assert abs(s.step(v, 0.0)[0]) <= 1.0

    def test_fast_propagator_matches_rational_map(self):
        # stiffly accurate implicit component: R = (1 + p1 z + p2 z^2)/(1-gz)^3
        g = DCRK_GAMMA
        p1, p2 = 1.0 - 3 * g, 0.5 - 3 * g + 3 * g * g
        for z in (0.5j, 2.0j, -3.0 + 1.0j, 40.0j, -200.0 + 0.0j):
            L = np.array([z])
            s = CompositeStepper(L, lambda v, t: np.zeros_like(v), 1.0, tau=0.0)
            got = s.step(np.array([1.0 + 0.0j]), 0.0)[0]
            want = (1 + p1 * z + p2 * z * z) / (1 - g * z) ** 3
            assert got == pytest.approx(want, rel=1e-13)

    def test_imaginary_axis_contraction(self):
        g = DCRK_GAMMA
        p1, p2 = 1.0 - 3 * g, 0.5 - 3 * g + 3 * g * g
        y = np.linspace(0.01, 500, 2000)
        z = 1j * y
        R = (1 + p1 * z + p2 * z * z) / (1 - g * z) ** 3
        assert np.all(np.abs(R) <= 1.0 + 1e-14)

    def test_fast_component_is_third_order(self):
        lam = 3.0j
        errs = []
        nts = (20, 40, 80, 160)
        for nt in nts:
            h = 1.0 / nt
            s = CompositeStepper(np.array([lam]), lambda v, t: np.zeros_like(v),
                                 h, tau=0.0)
            got = run_scalar(s, nt, 1.0)
            errs.append(abs(got - np.exp(lam)))
        a, _ = np.polyfit(np.log10(np.array(nts, float)), np.log10(errs), 1)
        assert 2.8 <= -a <= 3.2


class TestGaussIRK4:
    def test_linear_accuracy_small_step(self):
        L = np.array([0.5j])
        s = GaussIRK4Stepper(L, lambda v, t: np.zeros_like(v), 0.1)
        got = s.step(np.array([1.0 + 0.0j]), 0.0)[0]
        assert abs(got - np.exp(0.05j)) <= 1e-8

    def test_identity_growth(self):
        # v' = v via the linear part; one-step defect is the Pade(2,2)
        # error constant h^5/720 = 1.4e-8
        s = GaussIRK4Stepper(np.array([1.0 + 0.0j]),
                             lambda v, t: np.zeros_like(v), 0.1)
        got = s.step(np.array([1.0 + 0.0j]), 0.0)[0]
        assert abs(got - np.exp(0.1)) <= 2e-8

    def test_few_iterations_when_nonstiff(self):
        # forcing independent of v: the fixed point closes on the second pass
        nonlin = lambda v, t: np.full_like(v, np.sin(t))
        s = GaussIRK4Stepper(np.array([-1.0 + 0.0j]), nonlin, 0.1)
        s.step(np.array([1.0 + 0.0j]), 0.0)
        assert s.last_iterations <= 3

    def test_warm_start_keeps_counts_low(self):
        nonlin = lambda v, t: np.sin(t) - 0.1 * v**2
        s = GaussIRK4Stepper(np.array([-1.0 + 0.0j]), nonlin, 0.01)
        v = np.array([1.0 + 0.0j])
        counts = []
        for k in range(10):
            v = s.step(v, 0.01 * k)
            counts.append(s.last_iterations)
        assert np.mean(counts) <= 5.0

    def test_stage_residual_contract(self):
        nonlin = lambda v, t: np.cos(t) - v**3
        s = GaussIRK4Stepper(np.array([-2.0 + 0.0j]), nonlin, 0.05)
        v = np.array([0.7 + 0.0j])
        s.step(v, 0.0)
        assert s.stage_residual(v, 0.0) < 1e-8

    def test_no_convergence_error(self):
        runaway = lambda v, t: 100.0 * v
        s = GaussIRK4Stepper(np.zeros(1, dtype=complex), runaway, 1.0,
                             max_iters=20)
        with pytest.raises(NoConvergenceError):
            s.step(np.array([1.0 + 0.0j]), 0.0)


class TestSplitting:
    """Harmonic oscillator q' = p, p' = -q split into two exact shears."""

    @staticmethod
    def _flows():
        flow_a = lambda s, dt: np.array([s[0] + dt * s[1], s[1]])
        flow_b = lambda s, dt: np.array([s[0], s[1] - dt * s[0]])
        return flow_a, flow_b

    @staticmethod
    def _exact(t, q0=1.0, p0=0.3):
        return np.array([q0 * np.cos(t) + p0 * np.sin(t),
                         -q0 * np.sin(t) + p0 * np.cos(t)])

    @pytest.mark.parametrize("order,lo,hi", [(2, 1.9, 2.1), (4, 3.8, 4.2)])
    def test_orders(self, order, lo, hi):
        flow_a, flow_b = self._flows()
        errs = []
        nts = (16, 32, 64, 128)
        for nt in nts:
            s = SplitStepper(flow_a, flow_b, 1.0 / nt, order=order)
            state = np.array([1.0, 0.3])
            for k in range(nt):
                state = s.step(state, k / nt)
            errs.append(np.linalg.norm(state - self._exact(1.0)))
        a, _ = np.polyfit(np.log10(np.array(nts, float)), np.log10(errs), 1)
        assert lo <= -a <= hi

    def test_nonlinear_only_exact(self):
        # single exact flow: any composition of it is exact for any h
        flow_a = lambda u, dt: u
        flow_b = lambda u, dt: u * np.exp(1j * np.abs(u) ** 2 * dt)
        u0 = np.array([1.2 + 0.5j])
        for order in (2, 4):
            s = SplitStepper(flow_a, flow_b, 0.7, order=order)
            got = s.step(u0, 0.0)
            want = u0 * np.exp(1j * np.abs(u0) ** 2 * 0.7)
            assert np.max(np.abs(got - want)) <= 1e-14

    def test_invalid_order(self):
        with pytest.raises(ValueError):
            SplitStepper(lambda s, dt: s, lambda s, dt: s, 0.1, order=3)

    def test_ds_split_rejects_kp(self):
        g = Grid2D(nx=16, ny=16)
        with pytest.raises(UnsupportedSchemeError):
            DSSplitStepper(ModelSpec.kp1(), g, 0.1)
        with pytest.raises(UnsupportedSchemeError):
            make_stepper("strang2", ModelSpec.kp2(), g, 0.1)


class TestEvolve:
    def setup_method(self):
        self.grid = Grid2D(nx=32, ny=32, lx=5.0, ly=5.0)
        self.model = ModelSpec.ds2(epsilon=0.5, rho=1, eta=1.0)
        self.v0 = forward_transform(initial_data_ds(self.grid, 1.0), self.grid)

    def test_single_step_equals_stepper(self):
        r = evolve(self.v0, self.model, self.grid, "etd_cm", nt=1, t_max=0.05)
        s = make_stepper("etd_cm", self.model, self.grid, 0.05)
        want = s.step(self.v0.coeffs.copy(), 0.0)
        assert np.array_equal(r.field.coeffs, want)

    def test_richardson_contraction(self):
        fine = evolve(self.v0, self.model, self.grid, "etd_k", nt=64, t_max=0.2)
        mid = evolve(self.v0, self.model, self.grid, "etd_k", nt=32, t_max=0.2)
        coarse = evolve(self.v0, self.model, self.grid, "etd_k", nt=16, t_max=0.2)
        e_mid = np.linalg.norm(mid.field.coeffs - fine.field.coeffs)
        e_coarse = np.linalg.norm(coarse.field.coeffs - fine.field.coeffs)
        assert 10.0 <= e_coarse / e_mid <= 24.0

    def test_observer_stride(self):
        class Recorder:
            def __init__(self, stride):
                self.stride = stride
                self.seen = []

            def __call__(self, k, t, coeffs):
                self.seen.append((k, t))

        rec = Recorder(stride=8)
        evolve(self.v0, self.model, self.grid, "strang2", nt=8, t_max=0.1,
               observers=(rec,))
        assert rec.seen == [(8, pytest.approx(0.1))]

    def test_determinism(self):
        a = evolve(self.v0, self.model, self.grid, "etd_cm", nt=16, t_max=0.2)
        b = evolve(self.v0, self.model, self.grid, "etd_cm", nt=16, t_max=0.2)
        assert np.array_equal(a.field.coeffs, b.field.coeffs)

    def test_iteration_tracking(self):
        r = evolve(self.v0, self.model, self.grid, "irk4", nt=4, t_max=0.02)
        assert len(r.iterations) == 4
        assert r.mean_iterations is not None and r.mean_iterations >= 1.0

    def test_blow_up_detection(self):
        hot = forward_transform(40.0 * initial_data_ds(self.grid, 1.0), self.grid)
        model = ModelSpec.ds2(epsilon=0.1, rho=-1, eta=1.0)
        with np.errstate(over="ignore", invalid="ignore"):
            with pytest.raises(BlowUpError):
                evolve(hot, model, self.grid, "etd_cm", nt=10, t_max=1.0)

    def test_rejects_bad_nt(self):
        with pytest.raises(ValueError):
            evolve(self.v0, self.model, self.grid, "etd_cm", nt=0, t_max=1.0)

    def test_kp_state_stays_hermitian(self):
        # realness of the KP field survives the evolution to rounding
        from kpds.models import initial_data_kp

        g = Grid2D(nx=64, ny=32, lx=5.0, ly=5.0)
        v0 = forward_transform(initial_data_kp(g), g)
        for scheme in ("etd_cm", "dcrk"):
            r = evolve(v0, ModelSpec.kp2(epsilon=0.5), g, scheme,
                       nt=25, t_max=0.05)
            assert r.field.hermitian_defect() < 1e-13

    def test_unknown_scheme(self):
        with pytest.raises(UnsupportedSchemeError):
            make_stepper("leapfrog", self.model, self.grid, 0.1)
