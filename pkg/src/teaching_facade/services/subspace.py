"""
Servicio de Subespacio - Reducción del problema a un plano 2D.

Las trayectorias óptimas de este aprendiz viven en un plano que contiene
w0 y w*. Este módulo construye una base ortonormal de ese plano, proyecta
la instancia a 2D y levanta las soluciones de vuelta a n dimensiones.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..exceptions import DimensionMismatchError, PreconditionError
from .problem import (
    ProblemSpec,
    TeachingInput,
    Trajectory,
    VectorLike,
    as_vector,
    replay,
)

logger = logging.getLogger(__name__)

_PARALLEL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PlaneBasis:
    """Base ortonormal {b1, b2} de un plano en R^n."""

    b1: np.ndarray
    b2: np.ndarray

    @property
    def matrix(self) -> np.ndarray:
        """Matriz de proyección 2×n (su transpuesta es el levantamiento)."""
        return np.vstack([self.b1, self.b2])

    @property
    def n(self) -> int:
        return int(self.b1.size)


def _orthogonal_part(v: np.ndarray, b1: np.ndarray) -> np.ndarray:
    # Gram-Schmidt con re-ortogonalización
    u = v - (b1 @ v) * b1
    return u - (b1 @ u) * b1


def build_basis(w0: VectorLike, w_star: VectorLike) -> PlaneBasis:
    """
    Construye una base ortonormal de un plano que contiene w0 y w*.

    Si los vectores son linealmente dependientes (o alguno es cero), la base
    se completa con el primer eje coordenado no paralelo al span.

    Args:
        w0: Estado inicial
        w_star: Estado objetivo

    Returns:
        PlaneBasis determinista
    """
    w0 = as_vector(w0, "w0")
    w_star = as_vector(w_star, "w_star")
    if w0.shape != w_star.shape:
        raise DimensionMismatchError("w0 y w_star difieren en dimensión")
    n = w0.size
    if n < 2:
        raise PreconditionError("La reducción a un plano requiere n >= 2")

    scale = max(float(np.linalg.norm(w0)), float(np.linalg.norm(w_star)))
    axes = np.eye(n)

    b1 = None
    for v in (w0, w_star):
        norm = float(np.linalg.norm(v))
        if norm > _PARALLEL_TOL * max(scale, 1.0):
            b1 = v / norm
            break
    if b1 is None:
        logger.info("[Subspace] w0 = w* = 0, se usa el plano de los dos primeros ejes")
        return PlaneBasis(axes[0].copy(), axes[1].copy())

    candidates = [w_star, w0] + [axes[i] for i in range(n)]
    for v in candidates:
        u = _orthogonal_part(v, b1)
        norm = float(np.linalg.norm(u))
        reference = max(float(np.linalg.norm(v)), 1e-300)
        if norm > _PARALLEL_TOL * reference and norm > 1e-12:
            return PlaneBasis(b1, u / norm)

    raise PreconditionError("No se pudo completar la base del plano")


def project(v: VectorLike, basis: PlaneBasis) -> np.ndarray:
    """Coordenadas (b1ᵀv, b2ᵀv) de v en el plano."""
    v = as_vector(v, "v")
    if v.size != basis.n:
        raise DimensionMismatchError(f"v tiene dimensión {v.size}, se esperaba {basis.n}")
    return basis.matrix @ v


def lift(c: VectorLike, basis: PlaneBasis) -> np.ndarray:
    """Vector c1·b1 + c2·b2 en R^n."""
    c = as_vector(c, "c")
    if c.size != 2:
        raise DimensionMismatchError("lift espera coordenadas 2D")
    return c[0] * basis.b1 + c[1] * basis.b2


def lift_rows(rows: np.ndarray, basis: PlaneBasis) -> np.ndarray:
    """Levanta un arreglo (k, 2) de coordenadas a (k, n)."""
    rows = np.asarray(rows, dtype=float).reshape(-1, 2)
    return rows @ basis.matrix


def reduce_spec(spec: ProblemSpec) -> Tuple[ProblemSpec, PlaneBasis]:
    """
    Proyecta la instancia al plano span{w0, w*}.

    Args:
        spec: Instancia en n dimensiones

    Returns:
        (instancia 2D, base usada)
    """
    basis = build_basis(spec.w0, spec.w_star)
    reduced = ProblemSpec(
        w0=project(spec.w0, basis),
        w_star=project(spec.w_star, basis),
        eta=spec.eta,
        rx=spec.rx,
        ry=spec.ry,
    )
    logger.debug("[Subspace] instancia reducida de n=%d a 2D", spec.n)
    return reduced, basis


def lift_trajectory(
    trajectory: Trajectory, basis: PlaneBasis, spec: ProblemSpec
) -> Trajectory:
    """
    Levanta una trayectoria 2D a n dimensiones re-simulando sus entradas.

    Args:
        trajectory: Trayectoria en coordenadas del plano
        basis: Base del plano
        spec: Instancia original en n dimensiones

    Returns:
        Trajectory en R^n con residuo recalculado
    """
    inputs = [TeachingInput(lift(u.x, basis), u.y) for u in trajectory.inputs]
    return replay(spec.w0, inputs, spec.eta, spec.w_star)
