"""
Servicio de Heurísticas - Maestros GREEDY y STRAIGHT.

Este módulo implementa los dos maestros de referencia y el bucle genérico
que los ejecuta desde w0 hasta alcanzar w*.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from ..exceptions import PreconditionError
from .problem import (
    ProblemSpec,
    TeachingInput,
    Trajectory,
    VectorLike,
    as_vector,
    exact_landing,
    step,
)
from .subspace import build_basis, lift, project

logger = logging.getLogger(__name__)


class TeacherKind(Enum):
    """Maestros heurísticos disponibles."""

    GREEDY = "greedy"
    STRAIGHT = "straight"


class Termination(Enum):
    """Motivo de término de un maestro."""

    EXACT_LANDING = "exact_landing"
    TOLERANCE = "tolerance"
    MAX_STEPS = "max_steps"


@dataclass(frozen=True)
class TeacherPolicy:
    """Política heurística y ajustes de su solver interno."""

    kind: TeacherKind
    grid_resolution: int = 720
    polish_iterations: int = 20

    def __post_init__(self) -> None:
        if self.grid_resolution < 8:
            raise PreconditionError("grid_resolution debe ser al menos 8")
        if self.polish_iterations < 0:
            raise PreconditionError("polish_iterations no puede ser negativo")


@dataclass(frozen=True, eq=False)
class TeachRunResult:
    """Resultado de ejecutar un maestro heurístico."""

    trajectory: Trajectory
    steps: int
    converged: bool
    termination: Termination


def straight_step(w: VectorLike, spec: ProblemSpec) -> TeachingInput:
    """
    Entrada STRAIGHT: mover w en línea recta hacia w* tanto como se pueda.

    Args:
        w: Estado actual (distinto de w*)
        spec: Instancia de enseñanza

    Returns:
        TeachingInput (a·d, Ry) con el paso de forma cerrada
    """
    w = as_vector(w, "w")
    diff = spec.w_star - w
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        raise PreconditionError("straight_step requiere w != w*")

    alignment = float(diff @ w)
    if alignment > 0:
        a = min(spec.rx, spec.ry * dist / (2.0 * alignment))
    else:
        a = spec.rx
    return TeachingInput(a * diff / dist, spec.ry)


def _greedy_profile(
    theta: np.ndarray, w: np.ndarray, r: np.ndarray, spec: ProblemSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Minimiza exactamente ‖r + g(a)·e(θ)‖² en a ∈ [0, Rx] para cada ángulo.

    g(a) = eta·(Ry·a − s·a²) con s = wᵀe. Los puntos estacionarios de la
    cuártica son el vértice de g y las raíces de g(a) = −rᵀe.
    """
    cos, sin = np.cos(theta), np.sin(theta)
    s = cos * w[0] + sin * w[1]
    rho = cos * r[0] + sin * r[1]
    rx, ry, eta = spec.rx, spec.ry, spec.eta

    candidates = np.empty((5, theta.size))
    candidates[0] = 0.0
    candidates[1] = rx
    with np.errstate(divide="ignore", invalid="ignore"):
        candidates[2] = np.where(s > 0, ry / (2.0 * s), rx)
        k = -rho / eta
        disc = ry * ry - 4.0 * s * k
        real = disc >= 0
        q = 0.5 * (ry + np.sqrt(np.where(real, disc, 0.0)))
        candidates[3] = np.where(real, k / q, 0.0)
        candidates[4] = np.where(real & (s != 0), q / s, 0.0)
    candidates = np.clip(np.nan_to_num(candidates, nan=0.0), 0.0, rx)

    gain = eta * (ry * candidates - s * candidates * candidates)
    values = float(r @ r) + 2.0 * rho * gain + gain * gain
    best = np.argmin(values, axis=0)
    cols = np.arange(theta.size)
    return values[best, cols], candidates[best, cols]


def greedy_step(
    w: VectorLike, spec: ProblemSpec, policy: Optional[TeacherPolicy] = None
) -> TeachingInput:
    """
    Entrada GREEDY: minimiza ‖step(w, x, y) − w*‖² sobre las entradas admisibles.

    Se fija y = Ry, se barre la dirección de x en una grilla de ángulos con
    minimización exacta en el radio y se pule el mejor ángulo.

    Args:
        w: Estado actual (distinto de w*)
        spec: Instancia de enseñanza
        policy: Ajustes de grilla y pulido

    Returns:
        TeachingInput con y = Ry
    """
    policy = policy or TeacherPolicy(TeacherKind.GREEDY)
    w = as_vector(w, "w")
    if float(np.linalg.norm(spec.w_star - w)) == 0.0:
        raise PreconditionError("greedy_step requiere w != w*")

    basis = None
    if w.size == 2:
        w2, target2 = w, spec.w_star
    else:
        basis = build_basis(w, spec.w_star)
        w2, target2 = project(w, basis), project(spec.w_star, basis)
    r = w2 - target2

    m = policy.grid_resolution
    theta = 2.0 * np.pi * np.arange(m) / m
    extra = [np.arctan2(-r[1], -r[0])]
    if np.linalg.norm(w2) > 0:
        extra += [np.arctan2(w2[1], w2[0]), np.arctan2(-w2[1], -w2[0])]
    theta = np.concatenate([theta, extra])

    values, radii = _greedy_profile(theta, w2, r, spec)
    j = int(np.argmin(values))
    best_theta, best_a, best_value = float(theta[j]), float(radii[j]), float(values[j])

    if policy.polish_iterations > 0:
        h = 2.0 * np.pi / m
        result = minimize_scalar(
            lambda th: float(_greedy_profile(np.array([th]), w2, r, spec)[0][0]),
            bounds=(best_theta - h, best_theta + h),
            method="bounded",
            options={"xatol": 1e-13, "maxiter": 5 * policy.polish_iterations},
        )
        if result.fun < best_value:
            polished = np.array([result.x])
            best_value = float(result.fun)
            best_theta = float(result.x)
            best_a = float(_greedy_profile(polished, w2, r, spec)[1][0])

    x2 = best_a * np.array([np.cos(best_theta), np.sin(best_theta)])
    x = x2 if basis is None else lift(x2, basis)
    return TeachingInput(x, spec.ry)


def run_teacher(
    policy: TeacherPolicy,
    spec: ProblemSpec,
    max_steps: int = 100000,
    tol: Optional[float] = None,
) -> TeachRunResult:
    """
    Ejecuta un maestro heurístico desde w0.

    Antes de cada paso se verifica la tolerancia y se intenta un aterrizaje
    exacto sobre w*.

    Args:
        policy: Política GREEDY o STRAIGHT
        spec: Instancia de enseñanza
        max_steps: Máximo de entradas a consumir
        tol: Tolerancia de término (por defecto 1e-3·Ry)

    Returns:
        TeachRunResult con la trayectoria y el motivo de término
    """
    if max_steps < 1:
        raise PreconditionError("max_steps debe ser al menos 1")
    tol = 1e-3 * spec.ry if tol is None else tol

    stepper: Callable[[np.ndarray], TeachingInput]
    if policy.kind is TeacherKind.GREEDY:
        stepper = lambda w: greedy_step(w, spec, policy)  # noqa: E731
    else:
        stepper = lambda w: straight_step(w, spec)  # noqa: E731

    w = spec.w0.copy()
    states: List[np.ndarray] = [w]
    inputs: List[TeachingInput] = []
    termination = Termination.MAX_STEPS

    while True:
        if float(np.linalg.norm(spec.w_star - w)) <= tol:
            termination = Termination.TOLERANCE
            break
        if len(inputs) >= max_steps:
            break
        landing = exact_landing(w, spec)
        u = landing if landing is not None else stepper(w)
        w = step(w, u, spec.eta)
        states.append(w)
        inputs.append(u)
        if landing is not None:
            termination = Termination.EXACT_LANDING
            break

    residual = float(np.linalg.norm(w - spec.w_star))
    trajectory = Trajectory(
        states=np.vstack(states), inputs=inputs, eta=spec.eta, terminal_residual=residual
    )
    converged = termination is not Termination.MAX_STEPS
    logger.info(
        "[Heuristics] %s terminó en T=%d (%s, residuo=%.3e)",
        policy.kind.value.upper(),
        len(inputs),
        termination.value,
        residual,
    )
    return TeachRunResult(
        trajectory=trajectory,
        steps=len(inputs),
        converged=converged,
        termination=termination,
    )


class HeuristicService:
    """Servicio de heurísticas con una política fija por maestro."""

    def __init__(
        self,
        greedy_policy: Optional[TeacherPolicy] = None,
        straight_policy: Optional[TeacherPolicy] = None,
    ) -> None:
        """
        Inicializa el servicio con las políticas de cada maestro.

        Args:
            greedy_policy: Política usada para GREEDY (por defecto la estándar)
            straight_policy: Política usada para STRAIGHT
        """
        self.greedy_policy = greedy_policy or TeacherPolicy(TeacherKind.GREEDY)
        self.straight_policy = straight_policy or TeacherPolicy(TeacherKind.STRAIGHT)

    def policy(self, kind: TeacherKind) -> TeacherPolicy:
        return self.greedy_policy if kind is TeacherKind.GREEDY else self.straight_policy

    def run(
        self,
        kind: TeacherKind,
        spec: ProblemSpec,
        max_steps: int = 100000,
        tol: Optional[float] = None,
    ) -> TeachRunResult:
        """Ejecuta el maestro `kind` con la política configurada."""
        return run_teacher(self.policy(kind), spec, max_steps=max_steps, tol=tol)
