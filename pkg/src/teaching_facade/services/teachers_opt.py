"""
Servicio de Maestros Óptimos - NLP discreto y CNLP continuo.

El maestro NLP busca el menor número de pasos T con el que existe una
secuencia de entradas que lleva w0 a w*: cada T se resuelve como un
problema de mínimos cuadrados sobre las entradas (los estados se eliminan
simulando) y T se elige por búsqueda binaria.

El maestro CNLP resuelve el problema de tiempo mínimo en tiempo continuo
con la regla trapezoidal sobre una malla uniforme de K intervalos.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import PreconditionError, SolverError
from .heuristics import TeacherKind, TeacherPolicy, run_teacher, straight_step
from .optsolve import (
    SolverOptions,
    augmented_lagrangian,
    ball_projector,
    minimize_projected,
)
from .problem import ProblemSpec, TeachingInput, Trajectory, VectorLike, as_vector, replay
from .shooting import ContinuousTrajectory

logger = logging.getLogger(__name__)

InputsLike = Union[np.ndarray, Sequence[VectorLike]]


@dataclass(frozen=True)
class NlpSettings:
    """Ajustes del maestro NLP."""

    residual_tol: Optional[float] = None
    restarts: int = 8
    seed: int = 0
    perturbation: float = 0.25
    max_straight_steps: int = 200000
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(max_inner=2000))

    def __post_init__(self) -> None:
        if self.residual_tol is not None and self.residual_tol <= 0:
            raise PreconditionError("residual_tol debe ser positivo")
        if self.restarts < 1:
            raise PreconditionError("restarts debe ser al menos 1")

    def tolerance(self, spec: ProblemSpec) -> float:
        """Tolerancia efectiva 1e-6·max(1, ‖w*‖) si no se fijó una."""
        if self.residual_tol is not None:
            return self.residual_tol
        return 1e-6 * max(1.0, float(np.linalg.norm(spec.w_star)))


@dataclass(frozen=True)
class CnlpSettings:
    """Ajustes del maestro CNLP."""

    solver: SolverOptions = field(
        default_factory=lambda: SolverOptions(
            max_outer=40, max_inner=1500, grad_tol=1e-7, constraint_tol=1e-8
        )
    )
    min_final_time: float = 1e-6
    max_straight_steps: int = 200000


@dataclass(frozen=True, eq=False)
class CnlpSolution:
    """Solución trapezoidal de tiempo mínimo."""

    t_f: float
    mesh_times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    defect_norm: float
    terminal_residual: float
    converged: bool
    iterations: int

    def as_continuous(self) -> ContinuousTrajectory:
        """Vista de la solución como trayectoria continua muestreada en la malla."""
        return ContinuousTrajectory(
            times=self.mesh_times,
            w=self.states,
            p=None,
            inputs=self.inputs,
            hamiltonian_drift=None,
        )


def _input_matrix(inputs: InputsLike, n: int) -> np.ndarray:
    matrix = np.asarray(inputs, dtype=float)
    if matrix.size == 0:
        return np.zeros((0, n))
    return matrix.reshape(-1, n)


def _batch_rollout(
    w0: np.ndarray, X: np.ndarray, eta: float, ry: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Simula R secuencias a la vez; X tiene forma (R, T, n)."""
    rows, steps, n = X.shape
    w = np.broadcast_to(w0, (rows, n)).copy()
    states = np.empty((rows, steps + 1, n))
    states[:, 0] = w
    for t in range(steps):
        x = X[:, t]
        w = w - eta * (np.einsum("ij,ij->i", w, x) - ry)[:, None] * x
        states[:, t + 1] = w
    return w, states


def _batch_adjoint(
    states: np.ndarray, X: np.ndarray, eta: float, ry: float, terminal: np.ndarray
) -> np.ndarray:
    """Gradiente adjunto por fila dado ∂F/∂w_T de forma (R, n)."""
    grad = np.empty_like(X)
    lam = terminal
    for t in range(X.shape[1] - 1, -1, -1):
        w, x = states[:, t], X[:, t]
        proj = np.einsum("ij,ij->i", x, lam)[:, None]
        margin = (np.einsum("ij,ij->i", w, x) - ry)[:, None]
        grad[:, t] = -eta * (margin * lam + w * proj)
        lam = lam - eta * x * proj
    return grad


def rollout(
    w0: VectorLike, inputs: InputsLike, eta: float, ry: float
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Simula el aprendiz con y ≡ Ry.

    Args:
        w0: Estado inicial
        inputs: Entradas x_0..x_{T-1}
        eta: Tasa de aprendizaje
        ry: Etiqueta fija

    Returns:
        (w_T, estados de forma (T+1, n))
    """
    w = as_vector(w0, "w0")
    X = _input_matrix(inputs, w.size)
    w_T, states = _batch_rollout(w, X[None], eta, ry)
    return w_T[0], states[0]


def rollout_gradient(
    w0: VectorLike, inputs: InputsLike, eta: float, ry: float, target: VectorLike
) -> np.ndarray:
    """
    Gradiente exacto de ‖w_T − w*‖² respecto de cada x_t (método adjunto).

    Returns:
        Arreglo (T, n) con ∂F/∂x_t
    """
    w0 = as_vector(w0, "w0")
    X = _input_matrix(inputs, w0.size)[None]
    w_T, states = _batch_rollout(w0, X, eta, ry)
    terminal = 2.0 * (w_T - as_vector(target, "target"))
    return _batch_adjoint(states, X, eta, ry, terminal)[0]


def _reach_bound(steps: int, spec: ProblemSpec) -> float:
    # Σ eta·Rx·(Ry + Rx·r_t) con r_{t+1} = r_t + eta·Rx·(Ry + Rx·r_t)
    shift = float(np.linalg.norm(spec.w0)) + spec.ry / spec.rx
    return shift * ((1.0 + spec.eta * spec.rx**2) ** steps - 1.0)


def screened_steps(spec: ProblemSpec, tol: float) -> int:
    """
    Mayor T descartado por la cota de desplazamiento (0 si ninguno).

    Todo T menor o igual es infactible: en T pasos ‖w_T − w0‖ no puede
    superar la cota.
    """
    gap = spec.initial_distance - tol
    if gap <= 0:
        return 0
    shift = float(np.linalg.norm(spec.w0)) + spec.ry / spec.rx
    steps = int(np.log1p(gap / shift) / np.log1p(spec.eta * spec.rx**2))
    while steps > 0 and _reach_bound(steps, spec) >= gap:
        steps -= 1
    while _reach_bound(steps + 1, spec) < gap:
        steps += 1
    return steps


def _zero_trajectory(spec: ProblemSpec, steps: int) -> Trajectory:
    inputs = [TeachingInput(np.zeros(spec.n), spec.ry) for _ in range(steps)]
    return replay(spec.w0, inputs, spec.eta, spec.w_star)


def _straight_inputs(spec: ProblemSpec, steps: int, tol: float) -> np.ndarray:
    run = run_teacher(TeacherPolicy(TeacherKind.STRAIGHT), spec, max_steps=steps, tol=tol)
    X = np.zeros((steps, spec.n))
    if run.steps:
        X[: run.steps] = run.trajectory.input_matrix
    return X


def _resample_inputs(inputs: np.ndarray, steps: int) -> np.ndarray:
    """Perfil de entradas comprimido o estirado a `steps` pasos."""
    index = (np.arange(steps) * inputs.shape[0]) // steps
    return inputs[index]


def nlp_feasible(
    T: int,
    spec: ProblemSpec,
    settings: Optional[NlpSettings] = None,
    warm_start: Optional[InputsLike] = None,
) -> Optional[Trajectory]:
    """
    Busca una secuencia de T entradas que lleve w0 a w*.

    Minimiza ‖w_T − w*‖² sobre las entradas con proyección a la bola de
    radio Rx. Todos los arranques (STRAIGHT, el arranque tibio remuestreado
    a T pasos y perturbaciones aleatorias con semilla fija) se resuelven en
    un solo lote y la resolución termina en cuanto uno alcanza la tolerancia.

    Args:
        T: Número de pasos
        spec: Instancia
        settings: Ajustes del NLP
        warm_start: Entradas de otra longitud, por ejemplo un certificado
            de la búsqueda binaria

    Returns:
        Trajectory certificada o None si ningún arranque alcanza la tolerancia
    """
    settings = settings or NlpSettings()
    if T < 1:
        raise PreconditionError("T debe ser al menos 1")
    tol = settings.tolerance(spec)
    if spec.initial_distance <= tol:
        return _zero_trajectory(spec, T)
    if _reach_bound(T, spec) < spec.initial_distance - tol:
        logger.debug("[NLP] T=%d descartado por la cota de desplazamiento", T)
        return None

    n, eta, ry = spec.n, spec.eta, spec.ry
    project = ball_projector(spec.rx, n)
    bases = [_straight_inputs(spec, T, tol).reshape(-1)]
    if warm_start is not None:
        warm = _input_matrix(warm_start, n)
        if warm.shape[0]:
            bases.append(project(_resample_inputs(warm, T).reshape(-1)))
    rows = max(settings.restarts, len(bases))
    rng = np.random.default_rng(settings.seed)
    starts = []
    for attempt in range(rows):
        base = bases[attempt % len(bases)]
        if attempt >= len(bases):
            noise = rng.standard_normal(base.shape) * settings.perturbation * spec.rx
            base = project(base + noise)
        starts.append(base)

    latest: Dict[str, np.ndarray] = {}

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        X = z.reshape(rows, T, n)
        w_T, states = _batch_rollout(spec.w0, X, eta, ry)
        residual = w_T - spec.w_star
        latest["point"], latest["residuals"] = z, np.linalg.norm(residual, axis=1)
        grad = _batch_adjoint(states, X, eta, ry, 2.0 * residual)
        return float(np.sum(residual * residual)), grad.reshape(-1)

    def residuals_at(z: np.ndarray) -> np.ndarray:
        if latest.get("point") is not z:
            objective(z)
        return latest["residuals"]

    outcome = minimize_projected(
        objective,
        project,
        np.concatenate(starts),
        settings.solver,
        stop=lambda z: bool(residuals_at(z).min() <= tol),
    )
    residuals = residuals_at(outcome.point)
    best = int(np.argmin(residuals))
    logger.debug(
        "[NLP] T=%d: mejor residuo %.3e entre %d arranques en %d iteraciones",
        T,
        residuals[best],
        rows,
        outcome.iterations,
    )
    if residuals[best] > tol:
        return None
    X = outcome.point.reshape(rows, T, n)[best]
    return replay(spec.w0, [TeachingInput(x, ry) for x in X], eta, spec.w_star)


def _heuristic_bound(
    spec: ProblemSpec, settings: NlpSettings, tol: float
) -> Tuple[int, Trajectory]:
    """Cota superior: el menor T entre STRAIGHT y GREEDY."""
    limit = settings.max_straight_steps
    best: Optional[Tuple[int, Trajectory]] = None
    for kind in (TeacherKind.STRAIGHT, TeacherKind.GREEDY):
        steps = limit if best is None else best[0] - 1
        if steps < 1:
            break
        run = run_teacher(TeacherPolicy(kind), spec, max_steps=steps, tol=tol)
        logger.debug("[NLP] cota %s: %s en %d pasos", kind.value, run.converged, run.steps)
        if run.converged:
            best = (run.steps, run.trajectory)
    if best is None:
        raise SolverError(
            f"Ni STRAIGHT ni GREEDY terminaron en {limit} pasos; entregue t_hi explícitamente"
        )
    return best


def nlp_min_T(
    spec: ProblemSpec,
    settings: Optional[NlpSettings] = None,
    t_hi: Optional[int] = None,
) -> Tuple[int, Trajectory]:
    """
    Menor T factible por búsqueda binaria sobre nlp_feasible.

    La cota superior es el mejor T de STRAIGHT y GREEDY (o `t_hi`) y la
    inferior la cota de desplazamiento; la factibilidad es monótona porque
    rellenar con x = 0 conserva el estado. Cada T se arranca desde el
    último certificado.

    Args:
        spec: Instancia
        settings: Ajustes del NLP
        t_hi: Cota superior explícita

    Returns:
        (T mínimo, trayectoria certificado)
    """
    settings = settings or NlpSettings()
    tol = settings.tolerance(spec)
    if spec.initial_distance <= tol:
        return 0, _zero_trajectory(spec, 0)

    if t_hi is None:
        hi, best = _heuristic_bound(spec, settings, tol)
    else:
        certificate = nlp_feasible(t_hi, spec, settings)
        if certificate is None:
            raise SolverError(f"t_hi={t_hi} no es factible")
        hi, best = t_hi, certificate

    lo = min(screened_steps(spec, tol), hi - 1)
    logger.info("[NLP] búsqueda binaria en (%d, %d]", lo, hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        certificate = nlp_feasible(mid, spec, settings, warm_start=best.input_matrix)
        logger.info("[NLP] T=%d %s", mid, "factible" if certificate else "infactible")
        if certificate is not None:
            hi, best = mid, certificate
        else:
            lo = mid
    return hi, best


def _dynamics(w: np.ndarray, x: np.ndarray, ry: float) -> np.ndarray:
    return (ry - float(w @ x)) * x


def trapezoid_rollout(
    w0: VectorLike, inputs: InputsLike, t_f: float, spec: ProblemSpec
) -> np.ndarray:
    """
    Estados de la regla trapezoidal implícita en una malla uniforme.

    El paso implícito es lineal en w_{k+1} y se resuelve exactamente con
    Sherman-Morrison.

    Args:
        w0: Estado inicial
        inputs: Entradas x_0..x_K en los nodos
        t_f: Tiempo final
        spec: Instancia (se usa Ry)

    Returns:
        Estados (K+1, n)
    """
    w = as_vector(w0, "w0")
    X = _input_matrix(inputs, w.size)
    K = X.shape[0] - 1
    if K < 1:
        raise PreconditionError("Se requieren al menos dos nodos")
    c = 0.5 * t_f / K
    ry = spec.ry
    states = np.empty_like(X)
    states[0] = w
    for k in range(K):
        x1 = X[k + 1]
        b = w + c * _dynamics(w, X[k], ry) + c * ry * x1
        w = b - c * x1 * float(x1 @ b) / (1.0 + c * float(x1 @ x1))
        states[k + 1] = w
    return states


def trapezoid_defects(
    states: np.ndarray, inputs: InputsLike, t_f: float, spec: ProblemSpec
) -> np.ndarray:
    """Defectos w_{k+1} − w_k − (h/2)(f_k + f_{k+1}) de la regla trapezoidal."""
    W = np.asarray(states, dtype=float)
    X = _input_matrix(inputs, W.shape[1])
    K = X.shape[0] - 1
    h = t_f / K
    F = (spec.ry - np.sum(W * X, axis=1))[:, None] * X
    return W[1:] - W[:-1] - 0.5 * h * (F[:-1] + F[1:])


def _trapezoid_vjp(
    states: np.ndarray, X: np.ndarray, t_f: float, ry: float, seed: np.ndarray
) -> Tuple[float, np.ndarray]:
    """Producto vector-Jacobiano de w_K respecto de (t_f, X)."""
    K = X.shape[0] - 1
    c = 0.5 * t_f / K
    gX = np.zeros_like(X)
    g_c = 0.0
    lam = seed
    for k in range(K - 1, -1, -1):
        wk, wn = states[k], states[k + 1]
        x0, x1 = X[k], X[k + 1]
        mu = lam - c * x1 * float(x1 @ lam) / (1.0 + c * float(x1 @ x1))
        mu_x1 = float(mu @ x1)
        x1_wn = float(x1 @ wn)
        gX[k + 1] += c * ry * mu - c * (x1_wn * mu + mu_x1 * wn)
        g_c += float(mu @ (_dynamics(wk, x0, ry) + ry * x1)) - mu_x1 * x1_wn
        mu_x0 = float(x0 @ mu)
        gX[k] += c * (ry * mu - float(wk @ x0) * mu - mu_x0 * wk)
        lam = mu - c * x0 * mu_x0
    return g_c / (2.0 * K), gX


def cnlp_solve(
    spec: ProblemSpec, K: int = 100, settings: Optional[CnlpSettings] = None
) -> CnlpSolution:
    """
    Tiempo mínimo continuo por transcripción trapezoidal.

    Variables (t_f, x_0..x_K); los estados se obtienen con la regla
    trapezoidal implícita y la restricción w_K = w* se impone con
    Lagrangiano aumentado. ‖x_k‖ ≤ Rx y t_f ≥ min_final_time se imponen por
    proyección.

    Args:
        spec: Instancia
        K: Número de intervalos de la malla
        settings: Ajustes del CNLP

    Returns:
        CnlpSolution (converged indica factibilidad de la restricción terminal)
    """
    settings = settings or CnlpSettings()
    if K < 10:
        raise PreconditionError("K debe ser al menos 10")
    n, ry = spec.n, spec.ry
    if spec.initial_distance == 0.0:
        return CnlpSolution(
            t_f=0.0,
            mesh_times=np.zeros(K + 1),
            states=np.tile(spec.w0, (K + 1, 1)),
            inputs=np.zeros((K + 1, n)),
            defect_norm=0.0,
            terminal_residual=0.0,
            converged=True,
            iterations=0,
        )

    straight = run_teacher(
        TeacherPolicy(TeacherKind.STRAIGHT), spec, max_steps=settings.max_straight_steps
    )
    t_f0 = max(spec.eta * straight.steps, settings.min_final_time)
    X0 = np.empty((K + 1, n))
    for k in range(K):
        w_lin = spec.w0 + (k / K) * (spec.w_star - spec.w0)
        X0[k] = straight_step(w_lin, spec).x
    X0[K] = X0[K - 1]

    balls = ball_projector(spec.rx, n)

    def project(z: np.ndarray) -> np.ndarray:
        out = np.empty_like(z)
        out[0] = max(float(z[0]), settings.min_final_time)
        out[1:] = balls(z[1:])
        return out

    def objective(z: np.ndarray) -> Tuple[float, np.ndarray]:
        grad = np.zeros_like(z)
        grad[0] = 1.0
        return float(z[0]), grad

    def constraints(z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        t_f, X = float(z[0]), z[1:].reshape(K + 1, n)
        states = trapezoid_rollout(spec.w0, X, t_f, spec)
        jacobian = np.empty((n, z.size))
        for i in range(n):
            g_tf, gX = _trapezoid_vjp(states, X, t_f, ry, np.eye(n)[i])
            jacobian[i, 0] = g_tf
            jacobian[i, 1:] = gX.reshape(-1)
        return states[-1] - spec.w_star, jacobian

    z0 = np.concatenate([[t_f0], X0.reshape(-1)])
    outcome = augmented_lagrangian(objective, constraints, project, z0, settings.solver)

    t_f = float(outcome.point[0])
    X = outcome.point[1:].reshape(K + 1, n)
    states = trapezoid_rollout(spec.w0, X, t_f, spec)
    defects = trapezoid_defects(states, X, t_f, spec)
    terminal = float(np.linalg.norm(states[-1] - spec.w_star))
    converged = terminal <= settings.solver.constraint_tol
    logger.info(
        "[CNLP] K=%d t_f=%.6f residuo terminal=%.3e (%s)",
        K,
        t_f,
        terminal,
        "convergió" if converged else "sin convergencia",
    )
    return CnlpSolution(
        t_f=t_f,
        mesh_times=np.linspace(0.0, t_f, K + 1),
        states=states,
        inputs=X,
        defect_norm=float(np.linalg.norm(defects)),
        terminal_residual=terminal,
        converged=converged,
        iterations=outcome.iterations,
    )


class OptimalTeacherService:
    """Servicio de los maestros óptimos NLP y CNLP."""

    def __init__(
        self,
        nlp_settings: Optional[NlpSettings] = None,
        cnlp_settings: Optional[CnlpSettings] = None,
    ) -> None:
        """
        Inicializa el servicio con los ajustes de cada maestro.

        Args:
            nlp_settings: Ajustes del NLP discreto
            cnlp_settings: Ajustes del CNLP continuo
        """
        self.nlp_settings = nlp_settings or NlpSettings()
        self.cnlp_settings = cnlp_settings or CnlpSettings()

    def min_steps(self, spec: ProblemSpec) -> Tuple[int, Trajectory]:
        """T mínimo y su certificado."""
        return nlp_min_T(spec, self.nlp_settings)

    def min_time(self, spec: ProblemSpec, K: int = 100) -> CnlpSolution:
        """t_f mínimo en una malla de K intervalos."""
        return cnlp_solve(spec, K, self.cnlp_settings)
