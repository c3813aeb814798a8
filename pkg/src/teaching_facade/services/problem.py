"""
Servicio del Problema - Instancia de enseñanza y dinámica del aprendiz.

Este módulo define la instancia de enseñanza (w0, w*, eta, Rx, Ry), la
actualización de descenso de gradiente del aprendiz de mínimos cuadrados,
el reescalado de entradas a y = Ry, el aterrizaje exacto sobre w* y la
frontera del conjunto alcanzable en un paso.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from ..exceptions import DimensionMismatchError, PreconditionError

logger = logging.getLogger(__name__)

TOL_FEAS = 1e-9

VectorLike = Union[Sequence[float], np.ndarray]


def as_vector(values: VectorLike, name: str = "vector") -> np.ndarray:
    """
    Convierte una secuencia a un vector numpy de flotantes.

    Args:
        values: Valores del vector
        name: Nombre usado en el mensaje de error

    Returns:
        Vector 1D de tipo float
    """
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatchError(f"{name} debe ser un vector 1D, shape={arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Instancia de enseñanza: estado inicial, objetivo, tasa y cotas de entrada."""

    w0: np.ndarray
    w_star: np.ndarray
    eta: float
    rx: float = 1.0
    ry: float = 1.0

    def __post_init__(self) -> None:
        w0 = as_vector(self.w0, "w0")
        w_star = as_vector(self.w_star, "w_star")
        if w0.shape != w_star.shape:
            raise DimensionMismatchError(
                f"w0 y w_star difieren en dimensión: {w0.size} != {w_star.size}"
            )
        if w0.size < 1:
            raise DimensionMismatchError("La dimensión n debe ser al menos 1")

        for name in ("eta", "rx", "ry"):
            value = float(getattr(self, name))
            if not np.isfinite(value) or value <= 0:
                raise PreconditionError(f"{name} debe ser positivo, se recibió {value}")
            object.__setattr__(self, name, value)

        object.__setattr__(self, "w0", w0)
        object.__setattr__(self, "w_star", w_star)

    @property
    def n(self) -> int:
        """Dimensión del estado."""
        return int(self.w0.size)

    @property
    def initial_distance(self) -> float:
        """Distancia ‖w* − w0‖."""
        return float(np.linalg.norm(self.w_star - self.w0))

    def is_admissible(self, u: "TeachingInput") -> bool:
        """Indica si la entrada respeta ‖x‖ ≤ Rx y |y| ≤ Ry (con tolerancia)."""
        return bool(
            np.linalg.norm(u.x) <= self.rx + TOL_FEAS and abs(u.y) <= self.ry + TOL_FEAS
        )

    def to_dict(self) -> Dict:
        """Eco serializable de la instancia."""
        return {
            "w0": self.w0.tolist(),
            "w_star": self.w_star.tolist(),
            "eta": self.eta,
            "rx": self.rx,
            "ry": self.ry,
            "n": self.n,
        }


@dataclass(frozen=True, eq=False)
class TeachingInput:
    """Una entrada de enseñanza (x, y)."""

    x: np.ndarray
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", as_vector(self.x, "x"))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Trayectoria discreta w_0..w_T con sus T entradas."""

    states: np.ndarray
    inputs: List[TeachingInput]
    eta: float
    terminal_residual: float

    @property
    def steps(self) -> int:
        """Número de entradas consumidas T."""
        return len(self.inputs)

    @property
    def input_matrix(self) -> np.ndarray:
        """Entradas x_t apiladas, shape (T, n)."""
        if not self.inputs:
            return np.zeros((0, self.states.shape[1]))
        return np.vstack([u.x for u in self.inputs])

    def replay_error(self) -> float:
        """Máxima discrepancia al re-simular las entradas con `step`."""
        error = 0.0
        for t, u in enumerate(self.inputs):
            nxt = step(self.states[t], u, self.eta)
            error = max(error, float(np.max(np.abs(nxt - self.states[t + 1]))))
        return error


def step(w: VectorLike, u: TeachingInput, eta: float) -> np.ndarray:
    """
    Aplica una actualización de descenso de gradiente de mínimos cuadrados.

    Args:
        w: Estado actual del aprendiz
        u: Entrada de enseñanza (x, y)
        eta: Tasa de aprendizaje

    Returns:
        w − eta·(wᵀx − y)·x
    """
    w = as_vector(w, "w")
    if w.shape != u.x.shape:
        raise DimensionMismatchError(
            f"w y x difieren en dimensión: {w.size} != {u.x.size}"
        )
    return w - eta * (float(w @ u.x) - u.y) * u.x


def replay(
    w0: VectorLike, inputs: Sequence[TeachingInput], eta: float, w_star: VectorLike
) -> Trajectory:
    """
    Construye una trayectoria re-simulando una secuencia de entradas.

    Args:
        w0: Estado inicial
        inputs: Entradas a aplicar en orden
        eta: Tasa de aprendizaje
        w_star: Objetivo usado para el residuo terminal

    Returns:
        Trajectory con estados, entradas y residuo ‖w_T − w*‖
    """
    w = as_vector(w0, "w0")
    states = [w]
    for u in inputs:
        w = step(w, u, eta)
        states.append(w)
    residual = float(np.linalg.norm(w - as_vector(w_star, "w_star")))
    return Trajectory(
        states=np.vstack(states),
        inputs=list(inputs),
        eta=eta,
        terminal_residual=residual,
    )


def displacement_bound(w: VectorLike, spec: ProblemSpec) -> float:
    """Cota ‖step(w, u) − w‖ ≤ eta·Rx·(Ry + Rx·‖w‖) sobre entradas admisibles."""
    return spec.eta * spec.rx * (spec.ry + spec.rx * float(np.linalg.norm(w)))


def rescale_input(w: VectorLike, u: TeachingInput, ry: float) -> TeachingInput:
    """
    Reescala una entrada a la forma (a·x, Ry) con la misma actualización.

    Se resuelve g(a) = (wᵀx)a² − Ry·a + (y − wᵀx) = 0 tomando la raíz de
    menor |a|, que siempre cae en [−1, 1].

    Args:
        w: Estado actual
        u: Entrada original con |y| ≤ Ry
        ry: Cota de la etiqueta

    Returns:
        TeachingInput equivalente con y = Ry
    """
    w = as_vector(w, "w")
    if abs(u.y) > ry + TOL_FEAS:
        raise PreconditionError(f"|y|={abs(u.y)} excede Ry={ry}")
    c = float(w @ u.x)
    disc = ry * ry - 4.0 * c * (u.y - c)
    q = 0.5 * (ry + np.sqrt(max(disc, 0.0)))
    a = (u.y - c) / q
    assert abs(a) <= 1.0 + 1e-9, f"raíz fuera de [-1, 1]: {a}"
    a = float(np.clip(a, -1.0, 1.0))
    return TeachingInput(a * u.x, ry)


def exact_landing(w: VectorLike, spec: ProblemSpec) -> Optional[TeachingInput]:
    """
    Busca una entrada admisible que lleve w exactamente a w* en un paso.

    El candidato es x = a·d con d = (w* − w)/‖w* − w‖ e y = Ry, donde a
    resuelve eta·(Ry − a·wᵀd)·a = ‖w* − w‖ con |a| ≤ Rx.

    Args:
        w: Estado actual (distinto de w*)
        spec: Instancia de enseñanza

    Returns:
        La entrada de menor |a| o None si w* no es alcanzable en un paso
    """
    w = as_vector(w, "w")
    diff = spec.w_star - w
    dist = float(np.linalg.norm(diff))
    if dist == 0.0:
        raise PreconditionError("exact_landing requiere w != w*")

    d = diff / dist
    s = float(w @ d)
    k = dist / spec.eta
    if s == 0.0:
        roots = [k / spec.ry]
    else:
        disc = spec.ry * spec.ry - 4.0 * s * k
        if disc < 0.0:
            return None
        q = 0.5 * (spec.ry + np.sqrt(disc))
        roots = [q / s, k / q]

    feasible = [a for a in roots if abs(a) <= spec.rx + TOL_FEAS]
    if not feasible:
        return None
    a = float(np.clip(min(feasible, key=abs), -spec.rx, spec.rx))
    return TeachingInput(a * d, spec.ry)


def reachable_boundary(w: VectorLike, spec: ProblemSpec, samples: int) -> np.ndarray:
    """
    Muestrea la frontera del conjunto alcanzable en un paso desde w (n = 2).

    Para cada dirección e(θ) el desplazamiento máximo es
    max_{0≤a≤Rx} eta·(Ry − a·wᵀe)·a, que tiene forma cerrada.

    Args:
        w: Estado de partida en 2D
        spec: Instancia de enseñanza (n = 2)
        samples: Número de ángulos uniformes en [0, 2π)

    Returns:
        Arreglo (samples, 2) con los puntos de la frontera
    """
    w = as_vector(w, "w")
    if w.size != 2 or spec.n != 2:
        raise PreconditionError("reachable_boundary solo está definido para n = 2")
    if samples < 1:
        raise PreconditionError("samples debe ser positivo")

    theta = 2.0 * np.pi * np.arange(samples) / samples
    e = np.column_stack([np.cos(theta), np.sin(theta)])
    s = e @ w
    a = np.full(samples, spec.rx)
    positive = s > 0
    a[positive] = np.minimum(spec.rx, spec.ry / (2.0 * s[positive]))
    gain = spec.eta * (spec.ry * a - s * a * a)
    return w + gain[:, None] * e
