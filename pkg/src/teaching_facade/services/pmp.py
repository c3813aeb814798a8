"""
Servicio PMP - Condiciones necesarias de optimalidad punto a punto.

Este módulo contiene el Hamiltoniano, la minimización del QCQP que define
la entrada óptima para un par (w, p), la clasificación en los regímenes
I-V con sus formas cerradas, el escalado del co-estado y los resultados
analíticos del régimen IV.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import DimensionMismatchError, PreconditionError
from .problem import ProblemSpec, VectorLike, as_vector

logger = logging.getLogger(__name__)

TOL_ALIGN = 1e-8
QCQP_SAMPLES = 4096


class Regime(Enum):
    """Regímenes de las condiciones necesarias."""

    ORIGIN = "I"
    POSITIVE_ALIGNED = "II"
    NEG_ALIGNED_INSIDE = "III"
    NEG_ALIGNED_OUTSIDE = "IV"
    GENERAL = "V"


REGIME_TRANSITIONS: Dict[Regime, FrozenSet[Regime]] = {
    Regime.POSITIVE_ALIGNED: frozenset({Regime.POSITIVE_ALIGNED, Regime.ORIGIN}),
    Regime.ORIGIN: frozenset({Regime.ORIGIN, Regime.NEG_ALIGNED_INSIDE}),
    Regime.NEG_ALIGNED_INSIDE: frozenset(
        {Regime.NEG_ALIGNED_INSIDE, Regime.NEG_ALIGNED_OUTSIDE}
    ),
    Regime.NEG_ALIGNED_OUTSIDE: frozenset({Regime.NEG_ALIGNED_OUTSIDE}),
    Regime.GENERAL: frozenset({Regime.GENERAL}),
}


@dataclass(frozen=True, eq=False)
class PMPPoint:
    """Estado, co-estado y entrada óptima en un instante."""

    w: np.ndarray
    p: np.ndarray
    x: np.ndarray
    value: float
    regime: Regime


def _pair(w: VectorLike, p: VectorLike) -> Tuple[np.ndarray, np.ndarray]:
    w = as_vector(w, "w")
    p = as_vector(p, "p")
    if w.shape != p.shape:
        raise DimensionMismatchError(f"w y p difieren en dimensión: {w.size} != {p.size}")
    if float(np.linalg.norm(p)) == 0.0:
        raise PreconditionError("El co-estado p no puede ser cero")
    return w, p


def hamiltonian(w: VectorLike, p: VectorLike, x: VectorLike, y: float) -> float:
    """H = pᵀ((y − wᵀx)·x) + 1."""
    w, p, x = as_vector(w, "w"), as_vector(p, "p"), as_vector(x, "x")
    if not (w.shape == p.shape == x.shape):
        raise DimensionMismatchError("w, p y x deben tener la misma dimensión")
    return float((y - float(w @ x)) * float(p @ x) + 1.0)


def _objective(w: np.ndarray, p: np.ndarray, x: np.ndarray, ry: float) -> float:
    return float((ry - float(w @ x)) * float(p @ x))


def classify_regime(
    w: VectorLike, p: VectorLike, spec: ProblemSpec, tol_align: float = TOL_ALIGN
) -> Regime:
    """
    Clasifica el par (w, p) en uno de los regímenes I-V.

    Args:
        w: Estado
        p: Co-estado (no nulo)
        spec: Instancia (define R = Ry/(2·Rx))
        tol_align: Tolerancia de alineación y de origen

    Returns:
        Regime correspondiente
    """
    w, p = _pair(w, p)
    norm_w = float(np.linalg.norm(w))
    if norm_w <= tol_align:
        return Regime.ORIGIN

    w_hat = w / norm_w
    p_hat = p / float(np.linalg.norm(p))
    cosine = float(w_hat @ p_hat)
    if float(np.linalg.norm(w_hat - cosine * p_hat)) > tol_align:
        return Regime.GENERAL
    if cosine > 0:
        return Regime.POSITIVE_ALIGNED
    if norm_w <= spec.ry / (2.0 * spec.rx):
        return Regime.NEG_ALIGNED_INSIDE
    return Regime.NEG_ALIGNED_OUTSIDE


def regime4_max_curvature_control(
    w: VectorLike, w_star: VectorLike, spec: ProblemSpec
) -> np.ndarray:
    """
    Entrada del régimen IV que maximiza la tasa angular hacia w*.

    x = (Ry/(2‖w‖))·ŵ + sqrt(Rx² − (Ry/(2‖w‖))²)·v̂, con v̂ la componente
    de w* ortogonal a w; cumple wᵀx = Ry/2 y ‖x‖ = Rx.
    """
    w = as_vector(w, "w")
    w_star = as_vector(w_star, "w_star")
    norm_w = float(np.linalg.norm(w))
    radius = spec.ry / (2.0 * spec.rx)
    if norm_w < radius * (1.0 - 1e-12):
        raise PreconditionError(f"‖w‖={norm_w} está dentro de la bola de radio {radius}")

    w_hat = w / norm_w
    tangent = w_star - float(w_hat @ w_star) * w_hat
    norm_t = float(np.linalg.norm(tangent))
    if norm_t <= 1e-12 * max(1.0, float(np.linalg.norm(w_star))):
        raise PreconditionError("w y w* son linealmente dependientes")

    radial = spec.ry / (2.0 * norm_w)
    lateral = np.sqrt(max(spec.rx * spec.rx - radial * radial, 0.0))
    return radial * w_hat + lateral * tangent / norm_t


def regime_closed_form_input(
    regime: Regime,
    w: VectorLike,
    p: VectorLike,
    spec: ProblemSpec,
    target: Optional[VectorLike] = None,
) -> np.ndarray:
    """
    Entrada óptima de forma cerrada para los regímenes I-IV.

    En el régimen IV se usa la regla de máxima curvatura si se entrega un
    objetivo linealmente independiente de w, y la solución radial si no.
    """
    w, p = _pair(w, p)
    if regime is Regime.ORIGIN:
        return -spec.rx * p / float(np.linalg.norm(p))
    norm_w = float(np.linalg.norm(w))
    if norm_w == 0.0:
        raise PreconditionError(f"El régimen {regime.value} requiere w != 0")
    if regime is Regime.POSITIVE_ALIGNED:
        return -spec.rx * w / norm_w
    if regime is Regime.NEG_ALIGNED_INSIDE:
        return spec.rx * w / norm_w
    if regime is Regime.NEG_ALIGNED_OUTSIDE:
        radius = spec.ry / (2.0 * spec.rx)
        if norm_w < radius * (1.0 - 1e-12):
            raise PreconditionError(
                f"wᵀx = Ry/2 es infactible con ‖w‖={norm_w} < {radius}"
            )
        if target is not None:
            target = as_vector(target, "target")
            w_hat = w / norm_w
            tangent = target - float(w_hat @ target) * w_hat
            if float(np.linalg.norm(tangent)) > 1e-12 * max(1.0, float(np.linalg.norm(target))):
                return regime4_max_curvature_control(w, target, spec)
        return (spec.ry / (2.0 * norm_w * norm_w)) * w
    raise PreconditionError("El régimen V no tiene forma cerrada")


@lru_cache(maxsize=8)
def _unit_circle(samples: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    theta = 2.0 * np.pi * np.arange(samples) / samples
    arrays = (theta, np.cos(theta), np.sin(theta))
    for arr in arrays:
        arr.setflags(write=False)
    return arrays


def _general_minimize(
    w: np.ndarray, p: np.ndarray, spec: ProblemSpec, samples: int
) -> Tuple[np.ndarray, float]:
    # x = Rx(cosθ·ŵ + sinθ·û) sobre el plano span{w, p}
    gamma = float(np.linalg.norm(w))
    w_hat = w / gamma
    alpha = float(p @ w_hat)
    perp = p - alpha * w_hat
    beta = float(np.linalg.norm(perp))
    u_hat = perp / beta
    rx, ry = spec.rx, spec.ry
    k = gamma * rx

    def value(th: float) -> float:
        c, s = math.cos(th), math.sin(th)
        return float(rx * (ry - k * c) * (alpha * c + beta * s))

    theta, cos, sin = _unit_circle(samples)
    values = rx * (ry - k * cos) * (alpha * cos + beta * sin)
    floor = float(values.min())
    local = (values <= np.roll(values, 1)) & (values <= np.roll(values, -1))
    local &= values <= floor + 1e-4 * max(1.0, abs(floor))

    cell = 2.0 * np.pi / samples
    best_theta, best_value = float(theta[int(np.argmin(values))]), floor
    for idx in np.flatnonzero(local):
        th = float(theta[idx])
        for _ in range(30):
            s2, c2 = math.sin(2.0 * th), math.cos(2.0 * th)
            c, s = math.cos(th), math.sin(th)
            d1 = rx * (-ry * alpha * s + ry * beta * c + k * alpha * s2 - k * beta * c2)
            d2 = rx * (-ry * alpha * c - ry * beta * s + 2 * k * alpha * c2 + 2 * k * beta * s2)
            if d2 <= 0:
                break
            delta = min(max(d1 / d2, -cell), cell)
            th -= delta
            if abs(delta) < 1e-15:
                break
        candidate = value(th)
        if candidate < best_value:
            best_theta, best_value = th, candidate

    x = rx * (math.cos(best_theta) * w_hat + math.sin(best_theta) * u_hat)
    return x, best_value


def qcqp_minimize(
    w: VectorLike,
    p: VectorLike,
    spec: ProblemSpec,
    tol_align: float = TOL_ALIGN,
    samples: int = QCQP_SAMPLES,
) -> Tuple[np.ndarray, float]:
    """
    Minimiza (Ry − wᵀx)·(pᵀx) sobre ‖x‖ ≤ Rx.

    Los regímenes I-IV usan formas cerradas; el régimen V se reduce al plano
    span{w, p} y se resuelve con un barrido en ángulo pulido con Newton.

    Args:
        w: Estado
        p: Co-estado (no nulo)
        spec: Instancia
        tol_align: Tolerancia de clasificación
        samples: Puntos del barrido angular del régimen V

    Returns:
        (x óptimo, valor mínimo)
    """
    w, p = _pair(w, p)
    regime = classify_regime(w, p, spec, tol_align)
    if regime is Regime.GENERAL:
        return _general_minimize(w, p, spec, samples)
    x = regime_closed_form_input(regime, w, p, spec)
    return x, _objective(w, p, x, spec.ry)


def pmp_point(
    w: VectorLike, p: VectorLike, spec: ProblemSpec, tol_align: float = TOL_ALIGN
) -> PMPPoint:
    """Agrupa (w, p), la entrada óptima, su valor y el régimen."""
    w, p = _pair(w, p)
    x, value = qcqp_minimize(w, p, spec, tol_align)
    return PMPPoint(w=w, p=p, x=x, value=value, regime=classify_regime(w, p, spec, tol_align))


def costate_scale(w: VectorLike, p_hat: VectorLike, spec: ProblemSpec) -> np.ndarray:
    """
    Escala una dirección de co-estado para que el mínimo del QCQP valga −1.

    Args:
        w: Estado
        p_hat: Dirección del co-estado (se normaliza)
        spec: Instancia

    Returns:
        σ·p̂ con σ = −1/m, m el mínimo del QCQP en (w, p̂)
    """
    w, p_hat = _pair(w, p_hat)
    p_hat = p_hat / float(np.linalg.norm(p_hat))
    _, minimum = qcqp_minimize(w, p_hat, spec)
    if minimum >= 0:
        raise PreconditionError(f"El mínimo del QCQP debe ser negativo, se obtuvo {minimum}")
    return (-1.0 / minimum) * p_hat


def regime4_time_to_target(w: VectorLike, w_star: VectorLike, ry: float) -> float:
    """Tiempo 2(‖w*‖² − ‖w‖²)/Ry² del régimen IV para llevar ‖w‖ a ‖w*‖."""
    r2 = float(np.sum(as_vector(w, "w") ** 2))
    target2 = float(np.sum(as_vector(w_star, "w_star") ** 2))
    if target2 < r2 * (1.0 - 1e-12):
        raise PreconditionError("El régimen IV solo aumenta la norma: ‖w*‖ < ‖w‖")
    return max(2.0 * (target2 - r2) / (ry * ry), 0.0)


def regime4_angular_rate(w: VectorLike, spec: ProblemSpec) -> float:
    """Tasa angular máxima (Ry/2)·sqrt(Rx² − (Ry/(2‖w‖))²)/‖w‖ del régimen IV."""
    norm_w = float(np.linalg.norm(as_vector(w, "w")))
    radius = spec.ry / (2.0 * spec.rx)
    if norm_w < radius * (1.0 - 1e-12):
        raise PreconditionError(f"‖w‖={norm_w} está dentro de la bola de radio {radius}")
    radial = spec.ry / (2.0 * norm_w)
    lateral = np.sqrt(max(spec.rx * spec.rx - radial * radial, 0.0))
    return float(0.5 * spec.ry * lateral / norm_w)


def regime4_max_angle(r0: float, r1: float, spec: ProblemSpec) -> float:
    """
    Ángulo máximo que gira w mientras su norma crece de r0 a r1 en el régimen IV.

    Integra la tasa angular con d‖w‖/dt = Ry²/(4‖w‖).
    """
    radius = spec.ry / (2.0 * spec.rx)
    if r0 < radius * (1.0 - 1e-12) or r1 < r0:
        raise PreconditionError("Se requiere Ry/(2Rx) <= r0 <= r1")
    a, b = spec.rx, 0.5 * spec.ry

    def primitive(r: float) -> float:
        ratio = min(b / (a * r), 1.0)
        return float(np.sqrt(max(a * a * r * r - b * b, 0.0)) - b * np.arccos(ratio))

    return (2.0 / spec.ry) * (primitive(r1) - primitive(r0))


def is_legal_transition(current: Regime, following: Regime) -> bool:
    """Indica si `following` es alcanzable desde `current` en el grafo de transiciones."""
    seen = {current}
    frontier = [current]
    while frontier:
        node = frontier.pop()
        if node is following:
            return True
        for nxt in REGIME_TRANSITIONS[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return False


def classify_trajectory(
    states: Sequence[VectorLike],
    costates: Sequence[VectorLike],
    spec: ProblemSpec,
    tol_align: float = TOL_ALIGN,
) -> List[Regime]:
    """
    Clasifica cada muestra (w, p) de una trayectoria.

    Args:
        states: Estados w(t)
        costates: Co-estados p(t)
        spec: Instancia
        tol_align: Tolerancia de clasificación

    Returns:
        Lista de regímenes, uno por muestra
    """
    if len(states) != len(costates):
        raise DimensionMismatchError("states y costates deben tener el mismo largo")
    labels = [classify_regime(w, p, spec, tol_align) for w, p in zip(states, costates)]
    for before, after in zip(labels, labels[1:]):
        if not is_legal_transition(before, after):
            logger.warning(
                "[PMP] transición %s -> %s fuera del grafo", before.value, after.value
            )
    return labels
