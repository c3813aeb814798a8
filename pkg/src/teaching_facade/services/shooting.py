"""
Servicio de Disparo - Integración del sistema estado/co-estado y búsqueda de candidatos.

Este módulo integra las condiciones necesarias de optimalidad con RK4 de
paso fijo, barre la dirección inicial del co-estado para encontrar
trayectorias que pasan por w* y construye la trayectoria analítica
régimen III -> régimen IV.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from ..exceptions import PreconditionError, SolverError
from .pmp import (
    costate_scale,
    hamiltonian,
    qcqp_minimize,
    regime4_max_angle,
    regime4_max_curvature_control,
)
from .problem import ProblemSpec, VectorLike, as_vector

logger = logging.getLogger(__name__)

DUPLICATE_ANGLE = 1e-3
BATCH_SAMPLES = 256
REFINE_POINTS = 8
REFINE_WIDTH = 1e-9
_COLLAPSE = 1e-12


@dataclass(frozen=True, eq=False)
class ContinuousTrajectory:
    """Muestras de una trayectoria en tiempo continuo."""

    times: np.ndarray
    w: np.ndarray
    p: Optional[np.ndarray]
    inputs: np.ndarray
    hamiltonian_drift: Optional[float]

    @property
    def duration(self) -> float:
        return float(self.times[-1])

    @property
    def samples(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class ShootingSettings:
    """Ajustes de la búsqueda de candidatos por disparo."""

    angle_samples: int = 360
    dt: float = 1e-3
    t_max: float = 6.0
    hit_tol: float = 1e-3


@dataclass(frozen=True, eq=False)
class CandidateTrajectory:
    """Trayectoria de disparo que pasa cerca de w*."""

    phi0: float
    t_hit: float
    miss_distance: float
    trajectory: ContinuousTrajectory


def pmp_rhs(w: VectorLike, p: VectorLike, spec: ProblemSpec) -> Tuple[np.ndarray, np.ndarray]:
    """
    Lado derecho del sistema: ẇ = (Ry − wᵀx*)x*, ṗ = (pᵀx*)x*.

    Args:
        w: Estado
        p: Co-estado (no nulo)
        spec: Instancia

    Returns:
        (ẇ, ṗ)
    """
    w, p = as_vector(w, "w"), as_vector(p, "p")
    x, _ = qcqp_minimize(w, p, spec)
    return (spec.ry - float(w @ x)) * x, float(p @ x) * x


def integrate(
    w0: VectorLike,
    p0: VectorLike,
    spec: ProblemSpec,
    dt: float = 1e-3,
    t_max: float = 6.0,
    escape_radius: Optional[float] = None,
) -> ContinuousTrajectory:
    """
    Integra el sistema estado/co-estado con RK4 de paso fijo.

    El último paso se acorta para terminar exactamente en t_max.

    Args:
        w0: Estado inicial
        p0: Co-estado inicial (escalado con costate_scale para H = 0)
        spec: Instancia
        dt: Paso de integración
        t_max: Horizonte
        escape_radius: Detiene la integración si ‖w‖ lo supera

    Returns:
        ContinuousTrajectory con estados, co-estados, entradas y deriva de H
    """
    if dt <= 0 or t_max <= 0:
        raise PreconditionError("dt y t_max deben ser positivos")
    w, p = as_vector(w0, "w0"), as_vector(p0, "p0")
    ry = spec.ry

    times, states, costates, inputs = [0.0], [w], [p], []
    drift = 0.0
    t = 0.0
    while t_max - t > 1e-12 * t_max:
        if float(np.linalg.norm(p)) < _COLLAPSE:
            raise SolverError(f"El co-estado colapsó en t={t:.6f}")
        h = min(dt, t_max - t)
        x, _ = qcqp_minimize(w, p, spec)
        inputs.append(x)
        drift = max(drift, abs(hamiltonian(w, p, x, ry)))

        k1w, k1p = (ry - float(w @ x)) * x, float(p @ x) * x
        k2w, k2p = pmp_rhs(w + 0.5 * h * k1w, p + 0.5 * h * k1p, spec)
        k3w, k3p = pmp_rhs(w + 0.5 * h * k2w, p + 0.5 * h * k2p, spec)
        k4w, k4p = pmp_rhs(w + h * k3w, p + h * k3p, spec)
        w = w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        p = p + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        t = t_max if t_max - (t + h) <= 1e-12 * t_max else t + h

        times.append(t)
        states.append(w)
        costates.append(p)
        if escape_radius is not None and float(np.linalg.norm(w)) > escape_radius:
            break

    x, _ = qcqp_minimize(w, p, spec)
    inputs.append(x)
    drift = max(drift, abs(hamiltonian(w, p, x, ry)))
    return ContinuousTrajectory(
        times=np.array(times),
        w=np.vstack(states),
        p=np.vstack(costates),
        inputs=np.vstack(inputs),
        hamiltonian_drift=drift,
    )


def _batch_inputs(W: np.ndarray, P: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Minimizador del QCQP para muchos pares (w, p) en 2D a la vez."""
    rx, ry = spec.rx, spec.ry
    gamma = np.linalg.norm(W, axis=1)
    norm_p = np.linalg.norm(P, axis=1)
    at_origin = gamma <= 1e-8
    w_hat = np.where(
        at_origin[:, None], P / norm_p[:, None], W / np.maximum(gamma, 1e-300)[:, None]
    )
    u_hat = np.column_stack([-w_hat[:, 1], w_hat[:, 0]])
    alpha = np.sum(P * w_hat, axis=1)
    beta = np.sum(P * u_hat, axis=1)
    k = np.where(at_origin, 0.0, gamma * rx)

    theta = 2.0 * np.pi * np.arange(BATCH_SAMPLES) / BATCH_SAMPLES
    c, s = np.cos(theta)[None, :], np.sin(theta)[None, :]
    values = (ry - k[:, None] * c) * (alpha[:, None] * c + beta[:, None] * s)
    th = theta[np.argmin(values, axis=1)]

    cell = 2.0 * np.pi / BATCH_SAMPLES
    for _ in range(5):
        s1, c1, s2, c2 = np.sin(th), np.cos(th), np.sin(2 * th), np.cos(2 * th)
        d1 = -ry * alpha * s1 + ry * beta * c1 + k * alpha * s2 - k * beta * c2
        d2 = -ry * alpha * c1 - ry * beta * s1 + 2 * k * alpha * c2 + 2 * k * beta * s2
        safe = np.where(d2 > 0, d2, 1.0)
        th = th - np.where(d2 > 0, np.clip(d1 / safe, -cell, cell), 0.0)
    x = rx * (np.cos(th)[:, None] * w_hat + np.sin(th)[:, None] * u_hat)

    # régimen IV alineado: solución radial
    aligned = np.abs(beta) <= 1e-8 * norm_p
    outside = aligned & (alpha < 0) & (gamma > ry / (2.0 * rx)) & ~at_origin
    if np.any(outside):
        g2 = np.maximum(gamma[outside] ** 2, 1e-300)
        x[outside] = (ry / (2.0 * g2))[:, None] * W[outside]
    return x


def _batch_rhs(W: np.ndarray, P: np.ndarray, spec: ProblemSpec) -> Tuple[np.ndarray, np.ndarray]:
    X = _batch_inputs(W, P, spec)
    return (spec.ry - np.sum(W * X, axis=1))[:, None] * X, np.sum(P * X, axis=1)[:, None] * X


def _batch_closest(
    w0: np.ndarray,
    P0: np.ndarray,
    spec: ProblemSpec,
    dt: float,
    t_max: Union[float, np.ndarray],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Integra muchas trayectorias a la vez y devuelve (miss, t_hit) de cada una.

    `t_max` puede ser un horizonte por fila; cada fila deja de contar
    distancias al superar el suyo.
    """
    target = spec.w_star
    rows = P0.shape[0]
    horizons = np.broadcast_to(np.asarray(t_max, dtype=float), (rows,))
    end = float(horizons.max())
    W = np.tile(w0, (rows, 1))
    P = P0.copy()
    best = np.linalg.norm(W - target, axis=1)
    t_best = np.zeros(rows)
    t = 0.0
    while end - t > 1e-12 * end:
        h = min(dt, end - t)
        active = horizons - t > 1e-12 * end
        reach = np.clip((horizons - t) / h, 0.0, 1.0)
        k1w, k1p = _batch_rhs(W, P, spec)
        k2w, k2p = _batch_rhs(W + 0.5 * h * k1w, P + 0.5 * h * k1p, spec)
        k3w, k3p = _batch_rhs(W + 0.5 * h * k2w, P + 0.5 * h * k2p, spec)
        k4w, k4p = _batch_rhs(W + h * k3w, P + h * k3p, spec)
        Wn = W + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        P = P + (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)

        segment = Wn - W
        length2 = np.sum(segment * segment, axis=1)
        tau = np.clip(
            np.sum((target - W) * segment, axis=1) / np.where(length2 > 0, length2, 1.0),
            0.0,
            reach,
        )
        dist = np.linalg.norm(W + tau[:, None] * segment - target, axis=1)
        better = active & (dist < best)
        best = np.where(better, dist, best)
        t_best = np.where(better, t + tau * h, t_best)
        W = Wn
        t += h
    return best, t_best


def _unit(phi: float) -> np.ndarray:
    return np.array([np.cos(phi), np.sin(phi)])


def _refine_angles(
    lows: np.ndarray,
    highs: np.ndarray,
    horizons: np.ndarray,
    spec: ProblemSpec,
    dt: float,
    max_rounds: int = 40,
) -> np.ndarray:
    """
    Acerca todos los intervalos de ángulo a la vez.

    En cada ronda se integran REFINE_POINTS ángulos interiores por intervalo
    en una sola llamada a _batch_closest y el intervalo se reduce a los
    vecinos del mejor, hasta un ancho de REFINE_WIDTH.
    """
    lows, highs = np.array(lows, dtype=float), np.array(highs, dtype=float)
    fractions = np.arange(1, REFINE_POINTS + 1) / (REFINE_POINTS + 1)
    rows = np.arange(lows.size)
    best = 0.5 * (lows + highs)
    for _ in range(max_rounds):
        if np.max(highs - lows) <= REFINE_WIDTH:
            break
        grid = lows[:, None] + (highs - lows)[:, None] * fractions[None, :]
        P0 = np.vstack([costate_scale(spec.w0, _unit(phi), spec) for phi in grid.ravel()])
        miss, _ = _batch_closest(
            spec.w0, P0, spec, dt, np.repeat(horizons, REFINE_POINTS)
        )
        best = grid[rows, np.argmin(miss.reshape(lows.size, REFINE_POINTS), axis=1)]
        half = (highs - lows) / (REFINE_POINTS + 1)
        lows, highs = best - half, best + half
    return best


def _finalize(phi: float, spec: ProblemSpec, dt: float, horizon: float) -> CandidateTrajectory:
    p0 = costate_scale(spec.w0, _unit(phi), spec)
    _, t_hits = _batch_closest(spec.w0, p0[None, :], spec, dt, horizon)
    t_hit = max(float(t_hits[0]), dt)
    trajectory = integrate(spec.w0, p0, spec, dt, t_hit)
    distances = np.linalg.norm(trajectory.w - spec.w_star, axis=1)
    k = int(np.argmin(distances))
    return CandidateTrajectory(
        phi0=float(np.mod(phi, 2.0 * np.pi)),
        t_hit=float(trajectory.times[k]),
        miss_distance=float(distances[k]),
        trajectory=trajectory,
    )


def _degenerate_candidate(spec: ProblemSpec) -> CandidateTrajectory:
    p0 = costate_scale(spec.w0, _unit(0.0), spec)
    x, _ = qcqp_minimize(spec.w0, p0, spec)
    trajectory = ContinuousTrajectory(
        times=np.zeros(1),
        w=spec.w0[None, :].copy(),
        p=p0[None, :],
        inputs=x[None, :],
        hamiltonian_drift=abs(hamiltonian(spec.w0, p0, x, spec.ry)),
    )
    return CandidateTrajectory(phi0=0.0, t_hit=0.0, miss_distance=0.0, trajectory=trajectory)


def find_candidates(
    spec: ProblemSpec,
    angle_samples: int = 360,
    dt: float = 1e-3,
    t_max: float = 6.0,
    hit_tol: float = 1e-3,
    bracket_threshold: Optional[float] = None,
) -> List[CandidateTrajectory]:
    """
    Busca trayectorias que satisfacen las condiciones necesarias y pasan por w*.

    Se barre el ángulo inicial del co-estado, se integran todas las
    trayectorias y los mínimos locales de la distancia a w* se refinan con
    una búsqueda acotada sobre el ángulo.

    Args:
        spec: Instancia reducida a 2D
        angle_samples: Ángulos del barrido inicial
        dt: Paso de integración
        t_max: Horizonte de integración
        hit_tol: Distancia máxima para aceptar un candidato
        bracket_threshold: Distancia máxima de un mínimo del barrido para refinarlo

    Returns:
        Candidatos distintos ordenados por t_hit (lista vacía si ninguno llega)
    """
    if spec.n != 2:
        raise PreconditionError("find_candidates requiere una instancia 2D")
    if angle_samples < 3:
        raise PreconditionError("angle_samples debe ser al menos 3")
    if dt <= 0 or t_max <= 0 or hit_tol <= 0:
        raise PreconditionError("dt, t_max y hit_tol deben ser positivos")
    if spec.initial_distance == 0.0:
        return [_degenerate_candidate(spec)]

    threshold = (
        bracket_threshold
        if bracket_threshold is not None
        else max(50.0 * hit_tol, 0.1 * spec.initial_distance)
    )
    cell = 2.0 * np.pi / angle_samples
    phis = cell * np.arange(angle_samples)
    P0 = np.vstack([costate_scale(spec.w0, _unit(phi), spec) for phi in phis])
    miss, t_hit = _batch_closest(spec.w0, P0, spec, dt, t_max)
    logger.info(
        "[Shooting] barrido de %d ángulos, distancia mínima %.3e", angle_samples, miss.min()
    )

    minima = [
        i
        for i in range(angle_samples)
        if miss[i] <= miss[i - 1]
        and miss[i] <= miss[(i + 1) % angle_samples]
        and miss[i] <= threshold
    ]
    if not minima:
        logger.info("[Shooting] 0 candidatos distintos")
        return []
    horizons = np.minimum(t_max, 1.5 * t_hit[minima] + 20.0 * dt)
    refined = _refine_angles(phis[minima] - cell, phis[minima] + cell, horizons, spec, dt)
    logger.debug("[Shooting] %d mínimos refinados en lote", len(minima))

    found: List[CandidateTrajectory] = []
    for phi, horizon in zip(refined, horizons):
        candidate = _finalize(float(phi), spec, dt, float(horizon))
        logger.debug(
            "[Shooting] φ0=%.6f t_hit=%.4f miss=%.3e",
            candidate.phi0,
            candidate.t_hit,
            candidate.miss_distance,
        )
        if candidate.miss_distance <= hit_tol:
            found.append(candidate)

    distinct: List[CandidateTrajectory] = []
    for candidate in sorted(found, key=lambda c: c.miss_distance):
        gaps = [
            abs(np.angle(np.exp(1j * (candidate.phi0 - other.phi0)))) for other in distinct
        ]
        if all(gap >= DUPLICATE_ANGLE for gap in gaps):
            distinct.append(candidate)
    distinct.sort(key=lambda c: (c.t_hit, c.phi0))
    logger.info("[Shooting] %d candidatos distintos", len(distinct))
    return distinct


class ShootingService:
    """Servicio de disparo con ajustes fijos."""

    def __init__(self, settings: Optional[ShootingSettings] = None) -> None:
        self.settings = settings or ShootingSettings()

    def candidates(self, spec: ProblemSpec) -> List[CandidateTrajectory]:
        """Candidatos distintos de la instancia 2D, ordenados por t_hit."""
        settings = self.settings
        return find_candidates(
            spec,
            angle_samples=settings.angle_samples,
            dt=settings.dt,
            t_max=settings.t_max,
            hit_tol=settings.hit_tol,
        )


def _polar_samples(duration: float, dt: float) -> np.ndarray:
    count = max(1, int(np.ceil(duration / dt - 1e-6))) if duration > 0 else 0
    grid = dt * np.arange(1, count + 1)
    grid[-1:] = duration
    return grid


def regime_construction(
    w0: VectorLike, w_star: VectorLike, spec: ProblemSpec, dt: float = 1e-3
) -> ContinuousTrajectory:
    """
    Trayectoria constructiva régimen III -> régimen IV hacia w*.

    Fases: crecimiento radial (régimen III) hasta ‖w‖ = Ry/(2Rx), giro con
    la entrada de máxima curvatura hasta alinear w con w*, y crecimiento
    radial hasta ‖w‖ = ‖w*‖. Las tres fases tienen solución analítica y se
    muestrean cada dt.

    Args:
        w0: Estado inicial 2D
        w_star: Objetivo 2D con ‖w*‖ >= Ry/(2Rx)
        spec: Instancia (se usan eta, Rx, Ry)
        dt: Intervalo de muestreo

    Returns:
        ContinuousTrajectory sin co-estado
    """
    w = as_vector(w0, "w0")
    target = as_vector(w_star, "w_star")
    if w.size != 2 or target.size != 2:
        raise PreconditionError("regime_construction requiere vectores 2D")
    if dt <= 0:
        raise PreconditionError("dt debe ser positivo")
    rx, ry = spec.rx, spec.ry
    radius = ry / (2.0 * rx)
    r_target = float(np.linalg.norm(target))
    if r_target < radius:
        raise PreconditionError(f"‖w*‖={r_target} está dentro de la bola de radio {radius}")

    r0 = float(np.linalg.norm(w))
    if r0 > r_target * (1.0 + 1e-12):
        raise PreconditionError("El régimen IV no puede reducir la norma de w")
    psi = float(np.arctan2(w[1], w[0])) if r0 > 0 else float(np.arctan2(target[1], target[0]))
    psi_target = float(np.arctan2(target[1], target[0]))

    times, states, inputs = [0.0], [w], []
    t = 0.0

    def radial(r: float, angle: float) -> np.ndarray:
        return r * _unit(angle)

    # Fase III: ‖w‖ crece hacia Ry/Rx con x = Rx·ŵ
    if r0 < radius:
        limit = ry / rx
        duration = float(np.log((limit - r0) / (limit - radius)) / rx**2)
        for s in _polar_samples(duration, dt):
            inputs.append(rx * _unit(psi))
            times.append(t + s)
            states.append(radial(limit - (limit - r0) * np.exp(-(rx**2) * s), psi))
        t += duration
        r0 = radius
        states[-1] = radial(radius, psi)

    # Fase IV con máxima curvatura: r² crece a razón Ry²/2 y el ángulo gira
    gap = float(np.angle(np.exp(1j * (psi_target - psi))))
    if abs(gap) > 1e-12:
        reachable = regime4_max_angle(r0, r_target, spec)
        if reachable < abs(gap) - 1e-6:
            raise PreconditionError(
                f"w* fuera del embudo: faltan {abs(gap) - reachable:.3e} rad al llegar a ‖w*‖"
            )
        if reachable <= abs(gap):
            r_close = r_target
        else:
            r_close = brentq(
                lambda r: regime4_max_angle(r0, r, spec) - abs(gap), r0, r_target, xtol=1e-14
            )
        duration = 2.0 * (r_close**2 - r0**2) / ry**2
        turn = np.sign(gap)
        for s in _polar_samples(duration, dt):
            current = states[-1]
            ahead = float(np.arctan2(current[1], current[0])) + turn * 0.5 * np.pi
            inputs.append(regime4_max_curvature_control(current, _unit(ahead), spec))
            r = float(np.sqrt(r0**2 + 0.5 * ry**2 * s))
            times.append(t + s)
            states.append(radial(r, psi + turn * regime4_max_angle(r0, r, spec)))
        t += duration
        r0 = r_close
        psi = psi_target
        states[-1] = radial(r_close, psi_target)

    # Fase IV radial: x = (Ry/(2‖w‖²))·w
    duration = 2.0 * (r_target**2 - r0**2) / ry**2
    for s in _polar_samples(duration, dt):
        inputs.append((ry / (2.0 * float(states[-1] @ states[-1]))) * states[-1])
        times.append(t + s)
        states.append(radial(float(np.sqrt(r0**2 + 0.5 * ry**2 * s)), psi))
    t += duration

    last = states[-1]
    inputs.append((ry / (2.0 * float(last @ last))) * last)
    logger.info("[Shooting] construcción III->IV con duración %.6f", t)
    return ContinuousTrajectory(
        times=np.array(times),
        w=np.vstack(states),
        p=None,
        inputs=np.vstack(inputs),
        hamiltonian_drift=None,
    )
