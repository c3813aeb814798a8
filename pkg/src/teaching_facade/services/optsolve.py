"""
Servicio de Optimización - Motor de optimización suave con restricciones.

Este módulo provee el gradiente proyectado acelerado (con búsqueda lineal
de retroceso y reinicio por función) y un envoltorio de Lagrangiano
aumentado para restricciones de igualdad. Ambos maestros óptimos lo usan.
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np

from ..exceptions import PreconditionError, SolverError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]
Constraints = Callable[[np.ndarray], Tuple[np.ndarray, np.ndarray]]
Projector = Callable[[np.ndarray], np.ndarray]
StopRule = Callable[[np.ndarray], bool]

_MAX_LIPSCHITZ = 1e20
_MAX_PENALTY = 1e12


class StepRule(Enum):
    """Regla de paso del gradiente proyectado."""

    FIXED = "fixed"
    BACKTRACKING = "backtracking"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerancias y límites del motor de optimización."""

    max_outer: int = 50
    max_inner: int = 5000
    grad_tol: float = 1e-9
    constraint_tol: float = 1e-8
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    step_rule: StepRule = StepRule.BACKTRACKING
    step_size: float = 1.0
    objective_target: Optional[float] = None

    def __post_init__(self) -> None:
        if self.max_outer < 1 or self.max_inner < 1:
            raise PreconditionError("max_outer y max_inner deben ser positivos")
        for name in ("grad_tol", "constraint_tol", "penalty_init", "step_size"):
            if getattr(self, name) <= 0:
                raise PreconditionError(f"{name} debe ser positivo")
        if self.penalty_growth <= 1:
            raise PreconditionError("penalty_growth debe ser mayor que 1")


@dataclass(frozen=True, eq=False)
class SolveOutcome:
    """Resultado de una resolución."""

    point: np.ndarray
    objective: float
    constraint_violation: float
    converged: bool
    iterations: int


def project_ball(x: np.ndarray, radius: float) -> np.ndarray:
    """
    Proyecta x sobre la bola cerrada de radio `radius`.

    Args:
        x: Vector a proyectar
        radius: Radio positivo

    Returns:
        x si ‖x‖ ≤ radius, si no radius·x/‖x‖
    """
    if radius <= 0:
        raise PreconditionError("El radio debe ser positivo")
    x = np.asarray(x, dtype=float)
    norm = float(np.linalg.norm(x))
    if norm <= radius:
        return x.copy()
    return x * (radius / norm)


def ball_projector(radius: float, block: int) -> Projector:
    """Proyector que aplica project_ball a cada bloque consecutivo de tamaño `block`."""
    if radius <= 0 or block < 1:
        raise PreconditionError("ball_projector requiere radio > 0 y bloque >= 1")

    def _project(z: np.ndarray) -> np.ndarray:
        rows = np.asarray(z, dtype=float).reshape(-1, block)
        norms = np.linalg.norm(rows, axis=1)
        scale = np.where(norms > radius, radius / np.maximum(norms, 1e-300), 1.0)
        return (rows * scale[:, None]).reshape(-1)

    return _project


def _evaluate(fun: Objective, x: np.ndarray, iteration: int) -> Tuple[float, np.ndarray]:
    value, grad = fun(x)
    value = float(value)
    grad = np.asarray(grad, dtype=float)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise SolverError(
            f"Objetivo o gradiente no finito en la iteración {iteration} "
            f"(‖x‖={float(np.linalg.norm(x)):.3e})"
        )
    return value, grad


def minimize_projected(
    fun: Objective,
    projector: Projector,
    x0: np.ndarray,
    opts: Optional[SolverOptions] = None,
    stop: Optional[StopRule] = None,
) -> SolveOutcome:
    """
    Gradiente proyectado con momento de Nesterov.

    Con BACKTRACKING la constante de Lipschitz local se duplica hasta cumplir
    la condición de descenso suficiente y se relaja tras cada paso aceptado.
    Si un paso con momento aumenta el objetivo se reinicia el momento.

    Args:
        fun: Función que devuelve (f(x), ∇f(x))
        projector: Proyección idempotente sobre el conjunto factible
        x0: Punto inicial
        opts: Opciones del solver
        stop: Criterio adicional evaluado sobre cada iterado aceptado; si
            devuelve True la resolución termina como convergida

    Returns:
        SolveOutcome con el último iterado aceptado
    """
    opts = opts or SolverOptions()
    x = projector(np.array(x0, dtype=float))
    f, g = _evaluate(fun, x, 0)
    target = opts.objective_target

    def _done(k: int, converged: bool) -> SolveOutcome:
        return SolveOutcome(
            point=x, objective=f, constraint_violation=0.0, converged=converged, iterations=k
        )

    def _reached() -> bool:
        return (target is not None and f <= target) or (stop is not None and stop(x))

    if _reached():
        return _done(0, True)
    if float(np.linalg.norm(x - projector(x - g))) <= opts.grad_tol:
        return _done(0, True)

    lipschitz = 1.0 / opts.step_size
    y, fy, gy = x, f, g
    momentum = 1.0
    extrapolated = False

    for k in range(1, opts.max_inner + 1):
        if opts.step_rule is StepRule.BACKTRACKING:
            while True:
                z = projector(y - gy / lipschitz)
                fz, gz = _evaluate(fun, z, k)
                d = z - y
                bound = fy + float(gy @ d) + 0.5 * lipschitz * float(d @ d)
                if fz <= bound + 1e-14 * abs(fy):
                    break
                lipschitz *= 2.0
                if lipschitz > _MAX_LIPSCHITZ:
                    logger.debug("[Optsolve] búsqueda lineal agotada en la iteración %d", k)
                    return _done(k, False)
        else:
            z = projector(y - opts.step_size * gy)
            fz, gz = _evaluate(fun, z, k)

        if fz > f and extrapolated:
            y, fy, gy = x, f, g
            momentum = 1.0
            extrapolated = False
            continue

        x_prev = x
        x, f, g = z, fz, gz

        if _reached():
            return _done(k, True)
        if float(np.linalg.norm(x - projector(x - g))) <= opts.grad_tol:
            return _done(k, True)

        next_momentum = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * momentum * momentum))
        y = x + ((momentum - 1.0) / next_momentum) * (x - x_prev)
        fy, gy = _evaluate(fun, y, k)
        momentum = next_momentum
        extrapolated = True
        if opts.step_rule is StepRule.BACKTRACKING:
            lipschitz *= 0.9

    return _done(opts.max_inner, False)


def augmented_lagrangian(
    objective: Objective,
    constraints: Constraints,
    projector: Projector,
    x0: np.ndarray,
    opts: Optional[SolverOptions] = None,
) -> SolveOutcome:
    """
    Lagrangiano aumentado para min f(x) s.a. c(x) = 0, x ∈ conjunto proyectable.

    Cada iteración externa minimiza f + λᵀc + (ρ/2)‖c‖² con
    minimize_projected, actualiza λ ← λ + ρc y multiplica ρ por
    penalty_growth cuando ‖c‖ no baja al menos 4×.

    Args:
        objective: Función que devuelve (f(x), ∇f(x))
        constraints: Función que devuelve (c(x), J(x)) con J de forma (m, n)
        projector: Proyección sobre las restricciones simples
        x0: Punto inicial
        opts: Opciones del solver

    Returns:
        SolveOutcome; converged indica factibilidad y estacionariedad
    """
    opts = opts or SolverOptions()
    x = projector(np.array(x0, dtype=float))
    c, _ = constraints(x)
    multipliers = np.zeros_like(np.asarray(c, dtype=float))
    penalty = opts.penalty_init
    previous = float(np.linalg.norm(c))
    iterations = 0
    converged = False

    for outer in range(opts.max_outer):
        inner_tol = max(opts.grad_tol, 1e-3 * 0.1**outer)
        lam, rho = multipliers, penalty

        def merit(z: np.ndarray) -> Tuple[float, np.ndarray]:
            f, gf = objective(z)
            cz, jz = constraints(z)
            value = f + float(lam @ cz) + 0.5 * rho * float(cz @ cz)
            return value, gf + jz.T @ (lam + rho * cz)

        inner = minimize_projected(
            merit, projector, x, replace(opts, grad_tol=inner_tol, objective_target=None)
        )
        x = inner.point
        iterations += inner.iterations
        _, grad = merit(x)
        c, _ = constraints(x)
        violation = float(np.linalg.norm(c))
        stationarity = float(np.linalg.norm(x - projector(x - grad)))
        logger.debug(
            "[Optsolve] externa %d: ‖c‖=%.3e ρ=%.1e estacionariedad=%.3e interna=%d",
            outer,
            violation,
            penalty,
            stationarity,
            inner.iterations,
        )

        if violation <= opts.constraint_tol and stationarity <= opts.grad_tol:
            converged = True
            break

        multipliers = multipliers + penalty * c
        if violation > opts.constraint_tol and violation > 0.25 * previous:
            penalty *= opts.penalty_growth
        previous = violation
        if penalty > _MAX_PENALTY:
            logger.warning("[Optsolve] ρ superó %.0e sin factibilidad", _MAX_PENALTY)
            break

    value, _ = objective(x)
    c, _ = constraints(x)
    return SolveOutcome(
        point=x,
        objective=float(value),
        constraint_violation=float(np.linalg.norm(c)),
        converged=converged,
        iterations=iterations,
    )
