"""
Tests de las condiciones necesarias: QCQP, regímenes y resultados del régimen IV.
"""

import logging

import numpy as np
import pytest
from scipy.integrate import quad

from teaching_facade.exceptions import DimensionMismatchError, PreconditionError
from teaching_facade.services.pmp import (
    Regime,
    classify_regime,
    classify_trajectory,
    costate_scale,
    hamiltonian,
    is_legal_transition,
    pmp_point,
    qcqp_minimize,
    regime4_angular_rate,
    regime4_max_angle,
    regime4_max_curvature_control,
    regime4_time_to_target,
    regime_closed_form_input,
)
from teaching_facade.services.problem import ProblemSpec


@pytest.fixture
def spec():
    """Instancia con Rx = Ry = 1 (radio R = 1/2)."""
    return ProblemSpec([0.0, 1.0], [1.0, 0.0], 0.1)


def grid_minimum(w, p, rx, ry, angles=4000, radii=120):
    """Mínimo de (Ry − wᵀx)(pᵀx) sobre una grilla polar del disco ‖x‖ ≤ Rx."""
    theta = 2.0 * np.pi * np.arange(angles) / angles
    radius = np.linspace(0.0, rx, radii)
    c = np.outer(radius, np.cos(theta))
    s = np.outer(radius, np.sin(theta))
    values = (ry - (w[0] * c + w[1] * s)) * (p[0] * c + p[1] * s)
    return float(values.min())


def regime_pairs():
    """Pares (w, p) representativos de cada régimen."""
    return {
        Regime.ORIGIN: (np.zeros(2), np.array([0.3, -1.2])),
        Regime.POSITIVE_ALIGNED: (np.array([0.6, 0.8]), np.array([1.2, 1.6])),
        Regime.NEG_ALIGNED_INSIDE: (np.array([0.2, 0.1]), np.array([-2.0, -1.0])),
        Regime.NEG_ALIGNED_OUTSIDE: (np.array([1.5, -0.5]), np.array([-3.0, 1.0])),
        Regime.GENERAL: (np.array([0.4, 1.1]), np.array([0.7, -0.2])),
    }


def random_pair(regime, rng):
    """Par (w, p) aleatorio dentro del régimen pedido."""
    direction = rng.normal(size=2)
    direction /= np.linalg.norm(direction)
    scale = rng.uniform(0.1, 3.0)
    if regime is Regime.ORIGIN:
        return np.zeros(2), rng.normal(size=2)
    if regime is Regime.POSITIVE_ALIGNED:
        w = rng.uniform(0.05, 2.5) * direction
        return w, scale * w
    if regime is Regime.NEG_ALIGNED_INSIDE:
        w = rng.uniform(0.05, 0.5) * direction
        return w, -scale * w
    if regime is Regime.NEG_ALIGNED_OUTSIDE:
        w = rng.uniform(0.51, 2.5) * direction
        return w, -scale * w
    return rng.normal(size=2), rng.normal(size=2)


class TestClassification:
    """Tests de la clasificación en regímenes."""

    @pytest.mark.parametrize("regime", list(Regime))
    def test_representative_pairs(self, spec, regime):
        """Cada par representativo cae en su régimen."""
        w, p = regime_pairs()[regime]
        assert classify_regime(w, p, spec) is regime

    def test_boundary_radius_is_inside(self, spec):
        """‖w‖ = Ry/(2Rx) con p opuesto pertenece al régimen III."""
        assert classify_regime([0.5, 0.0], [-1.0, 0.0], spec) is Regime.NEG_ALIGNED_INSIDE

    def test_zero_costate_rejected(self, spec):
        """p = 0 no define un QCQP."""
        with pytest.raises(PreconditionError):
            classify_regime([1.0, 0.0], [0.0, 0.0], spec)

    def test_dimension_mismatch(self, spec):
        """w y p deben tener la misma dimensión."""
        with pytest.raises(DimensionMismatchError):
            qcqp_minimize([1.0, 0.0], [1.0, 0.0, 0.0], spec)


class TestQCQP:
    """Tests del minimizador punto a punto contra un oráculo de grilla."""

    @pytest.mark.parametrize("regime", list(Regime))
    def test_regimes_match_grid_oracle(self, spec, regime):
        """Las formas cerradas y el régimen V igualan al oráculo denso."""
        w, p = regime_pairs()[regime]
        x, value = qcqp_minimize(w, p, spec)
        oracle = grid_minimum(w, p, spec.rx, spec.ry)
        assert np.linalg.norm(x) <= spec.rx + 1e-12
        assert value == pytest.approx((spec.ry - w @ x) * (p @ x), abs=1e-12)
        assert value <= oracle + 1e-9
        assert value >= oracle - 1e-4

    def test_random_pairs_match_grid_oracle(self, rng):
        """Pares aleatorios con cotas distintas de 1."""
        spec = ProblemSpec([0.0, 1.0], [1.0, 0.0], 0.1, rx=1.5, ry=0.7)
        for _ in range(40):
            w, p = rng.normal(size=2), rng.normal(size=2)
            _, value = qcqp_minimize(w, p, spec)
            oracle = grid_minimum(w, p, spec.rx, spec.ry)
            assert value <= oracle + 1e-9
            assert value >= oracle - 1e-3

    @pytest.mark.performance
    @pytest.mark.parametrize("regime", list(Regime))
    def test_thousand_pairs_per_regime(self, spec, regime):
        """Mil pares por régimen contra el oráculo denso."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            w, p = random_pair(regime, rng)
            assert classify_regime(w, p, spec) is regime
            x, value = qcqp_minimize(w, p, spec)
            oracle = grid_minimum(w, p, spec.rx, spec.ry)
            assert np.linalg.norm(x) <= spec.rx + 1e-12
            assert value <= oracle + 1e-9
            assert value >= oracle - 1e-3 * max(1.0, abs(oracle))

    def test_closed_forms(self, spec):
        """Entradas de los regímenes I-IV."""
        assert regime_closed_form_input(
            Regime.ORIGIN, [0.0, 0.0], [0.0, 2.0], spec
        ) == pytest.approx([0.0, -1.0])
        assert regime_closed_form_input(
            Regime.POSITIVE_ALIGNED, [0.0, 2.0], [0.0, 1.0], spec
        ) == pytest.approx([0.0, -1.0])
        assert regime_closed_form_input(
            Regime.NEG_ALIGNED_INSIDE, [0.3, 0.0], [-1.0, 0.0], spec
        ) == pytest.approx([1.0, 0.0])
        x = regime_closed_form_input(Regime.NEG_ALIGNED_OUTSIDE, [2.0, 0.0], [-1.0, 0.0], spec)
        assert float(np.array([2.0, 0.0]) @ x) == pytest.approx(0.5)

    def test_general_has_no_closed_form(self, spec):
        """El régimen V se resuelve numéricamente."""
        with pytest.raises(PreconditionError):
            regime_closed_form_input(Regime.GENERAL, [0.4, 1.1], [0.7, -0.2], spec)

    @pytest.mark.parametrize("n", [3, 5, 10])
    def test_minimizer_confined_to_plane(self, rng, n):
        """El minimizador vive en span{w, p}."""
        spec = ProblemSpec(np.zeros(n), np.ones(n), 0.1)
        for _ in range(20):
            w, p = rng.normal(size=n), rng.normal(size=n)
            x, _ = qcqp_minimize(w, p, spec)
            basis, _ = np.linalg.qr(np.column_stack([w, p]))
            residual = x - basis @ (basis.T @ x)
            assert np.linalg.norm(residual) <= 1e-9

    def test_general_input_is_maximal(self, rng, spec):
        """En el régimen V la entrada óptima tiene ‖x‖ = Rx."""
        for _ in range(20):
            w, p = rng.normal(size=2), rng.normal(size=2)
            point = pmp_point(w, p, spec)
            if point.regime is Regime.GENERAL:
                assert np.linalg.norm(point.x) == pytest.approx(spec.rx, abs=1e-12)


class TestCostateScale:
    """Tests del escalado que anula el Hamiltoniano."""

    @pytest.mark.parametrize("regime", list(Regime))
    def test_scaled_minimum_is_minus_one(self, spec, regime):
        """Con el co-estado escalado el mínimo vale −1 y H = 0."""
        w, p = regime_pairs()[regime]
        scaled = costate_scale(w, p, spec)
        x, value = qcqp_minimize(w, scaled, spec)
        assert value == pytest.approx(-1.0, abs=1e-9)
        assert hamiltonian(w, scaled, x, spec.ry) == pytest.approx(0.0, abs=1e-9)

    def test_scale_is_positive_multiple(self, spec):
        """El escalado conserva la dirección."""
        scaled = costate_scale([0.4, 1.1], [0.7, -0.2], spec)
        direction = np.array([0.7, -0.2]) / np.linalg.norm([0.7, -0.2])
        assert scaled / np.linalg.norm(scaled) == pytest.approx(direction)


class TestRegimeFour:
    """Tests de los resultados analíticos del régimen IV."""

    def test_max_curvature_control(self, spec):
        """wᵀx = Ry/2 y ‖x‖ = Rx."""
        w = np.array([1.0, 0.0])
        x = regime4_max_curvature_control(w, [0.0, 2.0], spec)
        assert float(w @ x) == pytest.approx(0.5)
        assert np.linalg.norm(x) == pytest.approx(1.0)
        assert x[1] > 0

    def test_max_curvature_inside_ball_rejected(self, spec):
        """Dentro de la bola no existe x con wᵀx = Ry/2."""
        with pytest.raises(PreconditionError):
            regime4_max_curvature_control([0.2, 0.0], [0.0, 1.0], spec)

    def test_angular_rate_matches_dynamics(self, spec):
        """La tasa analítica coincide con la derivada numérica del ángulo."""
        w = np.array([1.2, 0.3])
        x = regime4_max_curvature_control(w, [-1.0, 2.0], spec)
        h = 1e-7
        w_next = w + h * (spec.ry - w @ x) * x
        change = np.arctan2(w_next[1], w_next[0]) - np.arctan2(w[1], w[0])
        assert change / h == pytest.approx(regime4_angular_rate(w, spec), rel=1e-5)

    def test_norm_law(self, spec):
        """d‖w‖²/dt = Ry²/2 bajo el régimen IV."""
        w = np.array([0.9, -0.6])
        x = regime4_max_curvature_control(w, [1.0, 1.0], spec)
        w_dot = (spec.ry - w @ x) * x
        assert 2.0 * float(w @ w_dot) == pytest.approx(0.5 * spec.ry**2)

    def test_time_to_target(self):
        """2(‖w*‖² − ‖w‖²)/Ry²."""
        assert regime4_time_to_target([1.0, 0.0], [0.0, 2.0], 1.0) == pytest.approx(6.0)
        assert regime4_time_to_target([1.0, 0.0], [0.0, 2.0], 2.0) == pytest.approx(1.5)
        with pytest.raises(PreconditionError):
            regime4_time_to_target([0.0, 2.0], [1.0, 0.0], 1.0)

    def test_max_angle_matches_quadrature(self, spec):
        """La integral cerrada coincide con la cuadratura de la tasa angular."""
        def dtheta_dr(r):
            return regime4_angular_rate([r, 0.0], spec) * 4.0 * r / spec.ry**2

        expected, _ = quad(dtheta_dr, 0.5, 2.0)
        assert regime4_max_angle(0.5, 2.0, spec) == pytest.approx(expected, rel=1e-6)
        assert regime4_max_angle(1.0, 1.0, spec) == 0.0


class TestTransitions:
    """Tests del grafo de transiciones entre regímenes."""

    @pytest.mark.parametrize(
        "before,after",
        [
            (Regime.POSITIVE_ALIGNED, Regime.ORIGIN),
            (Regime.ORIGIN, Regime.NEG_ALIGNED_INSIDE),
            (Regime.POSITIVE_ALIGNED, Regime.NEG_ALIGNED_INSIDE),
            (Regime.NEG_ALIGNED_INSIDE, Regime.NEG_ALIGNED_OUTSIDE),
            (Regime.GENERAL, Regime.GENERAL),
        ],
    )
    def test_legal(self, before, after):
        """Transiciones del grafo o alcanzables en él."""
        assert is_legal_transition(before, after)

    @pytest.mark.parametrize(
        "before,after",
        [
            (Regime.NEG_ALIGNED_OUTSIDE, Regime.NEG_ALIGNED_INSIDE),
            (Regime.GENERAL, Regime.ORIGIN),
            (Regime.ORIGIN, Regime.POSITIVE_ALIGNED),
            (Regime.NEG_ALIGNED_INSIDE, Regime.GENERAL),
        ],
    )
    def test_illegal(self, before, after):
        """Transiciones fuera del grafo."""
        assert not is_legal_transition(before, after)

    def test_classify_trajectory_sequence(self, spec):
        """Un recorrido alineado pasa por II, I, III y IV."""
        states = [[-0.5, 0.0], [0.0, 0.0], [0.3, 0.0], [1.0, 0.0]]
        costates = [[-1.0, 0.0]] * 4
        labels = classify_trajectory(states, costates, spec)
        assert [label.value for label in labels] == ["II", "I", "III", "IV"]

    def test_illegal_sequence_is_logged(self, spec, caplog):
        """Una transición ilegal se registra como advertencia."""
        with caplog.at_level(logging.WARNING):
            classify_trajectory([[1.0, 0.0], [0.3, 0.0]], [[-1.0, 0.0]] * 2, spec)
        assert "IV -> III" in caplog.text

    def test_length_mismatch(self, spec):
        """Estados y co-estados deben tener el mismo largo."""
        with pytest.raises(DimensionMismatchError):
            classify_trajectory([[1.0, 0.0]], [], spec)
