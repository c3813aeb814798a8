"""
Teaching Facade - Punto de entrada único para los maestros de enseñanza.

Este módulo implementa el patrón Facade que orquesta los servicios del
paquete (reducción a 2D, heurísticas, NLP, CNLP, disparo y reportes) para
resolver una instancia de enseñanza con un solo llamado.
"""

import logging
import time
from collections import Counter
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from .exceptions import PreconditionError, TeachingError
from .services.heuristics import HeuristicService, TeacherKind
from .services.pmp import Regime, classify_trajectory
from .services.problem import ProblemSpec, Trajectory, VectorLike, reachable_boundary
from .services.shooting import ContinuousTrajectory, ShootingService
from .services.subspace import PlaneBasis, lift_rows, lift_trajectory, reduce_spec
from .services.teachers_opt import OptimalTeacherService

logger = logging.getLogger(__name__)

AnyTrajectory = Union[Trajectory, ContinuousTrajectory]


class Method(Enum):
    """Maestros disponibles."""

    GREEDY = "greedy"
    STRAIGHT = "straight"
    NLP = "nlp"
    CNLP = "cnlp"
    SHOOT = "shoot"


@dataclass
class SolveReport:
    """Resultado resumido de una resolución."""

    method: str
    spec: Dict
    converged: bool
    T: Optional[int] = None
    t_f: Optional[float] = None
    terminal_residual: Optional[float] = None
    wall_time_seconds: float = 0.0
    candidate_count: Optional[int] = None
    reason: Optional[str] = None

    def to_dict(self) -> Dict:
        """Reporte serializable con todos los campos presentes."""
        return asdict(self)


@dataclass(eq=False)
class SolveResult:
    """Reporte junto con la trayectoria producida (si la hubo)."""

    report: SolveReport
    trajectory: Optional[AnyTrajectory] = None


class TeachingFacade:
    """
    Facade que proporciona una interfaz simplificada para enseñar al aprendiz.

    Este facade orquesta:
    - Heurísticas: GREEDY y STRAIGHT en la dimensión original
    - Maestros óptimos: NLP, CNLP y disparo sobre el plano span{w0, w*}
    - Análisis: regímenes a lo largo de una trayectoria y conjunto alcanzable
    """

    def __init__(
        self,
        heuristics: Optional[HeuristicService] = None,
        optimal: Optional[OptimalTeacherService] = None,
        shooting: Optional[ShootingService] = None,
    ):
        """
        Inicializa el facade con los servicios de cada maestro.

        Args:
            heuristics: Servicio de heurísticas (se crea uno por defecto si no se proporciona)
            optimal: Servicio de los maestros NLP y CNLP (se crea uno por defecto)
            shooting: Servicio de disparo (se crea uno por defecto)
        """
        self.heuristics = heuristics or HeuristicService()
        self.optimal = optimal or OptimalTeacherService()
        self.shooting = shooting or ShootingService()

        # Historial de reportes para estadísticas
        self._history: List[SolveReport] = []

    def solve(
        self,
        method: Union[Method, str],
        spec: ProblemSpec,
        max_steps: int = 100000,
        tol: Optional[float] = None,
        mesh: int = 100,
    ) -> SolveResult:
        """
        Resuelve una instancia con el maestro pedido.

        Los errores del dominio no escapan: se devuelven como un reporte con
        converged=False y la razón.

        Args:
            method: Maestro a usar
            spec: Instancia de enseñanza
            max_steps: Máximo de pasos de las heurísticas
            tol: Tolerancia de término de las heurísticas
            mesh: Intervalos de la malla del CNLP

        Returns:
            SolveResult con el reporte y la trayectoria
        """
        method = Method(method)
        logger.info("[Facade] resolviendo con %s (n=%d)", method.value, spec.n)
        start = time.perf_counter()
        try:
            if method in (Method.GREEDY, Method.STRAIGHT):
                result = self._solve_heuristic(method, spec, max_steps, tol)
            elif method is Method.NLP:
                result = self._solve_nlp(spec)
            elif method is Method.CNLP:
                result = self._solve_cnlp(spec, mesh)
            else:
                result = self._solve_shoot(spec)
        except TeachingError as error:
            logger.warning("[Facade] %s falló: %s", method.value, error)
            result = SolveResult(
                report=SolveReport(
                    method=method.value, spec=spec.to_dict(), converged=False, reason=str(error)
                )
            )
        result.report.wall_time_seconds = time.perf_counter() - start
        self._history.append(result.report)
        return result

    def _solve_heuristic(
        self, method: Method, spec: ProblemSpec, max_steps: int, tol: Optional[float]
    ) -> SolveResult:
        run = self.heuristics.run(TeacherKind(method.value), spec, max_steps=max_steps, tol=tol)
        report = SolveReport(
            method=method.value,
            spec=spec.to_dict(),
            converged=run.converged,
            T=run.steps,
            terminal_residual=run.trajectory.terminal_residual,
            reason=None if run.converged else f"se alcanzó max_steps={max_steps}",
        )
        return SolveResult(report=report, trajectory=run.trajectory)

    def _reduce(self, spec: ProblemSpec) -> Tuple[ProblemSpec, Optional[PlaneBasis]]:
        if spec.n <= 2:
            return spec, None
        return reduce_spec(spec)

    def _solve_nlp(self, spec: ProblemSpec) -> SolveResult:
        reduced, basis = self._reduce(spec)
        steps, trajectory = self.optimal.min_steps(reduced)
        if basis is not None:
            trajectory = lift_trajectory(trajectory, basis, spec)
        report = SolveReport(
            method=Method.NLP.value,
            spec=spec.to_dict(),
            converged=True,
            T=steps,
            terminal_residual=trajectory.terminal_residual,
        )
        return SolveResult(report=report, trajectory=trajectory)

    def _lift_continuous(
        self, trajectory: ContinuousTrajectory, basis: Optional[PlaneBasis]
    ) -> ContinuousTrajectory:
        if basis is None:
            return trajectory
        return ContinuousTrajectory(
            times=trajectory.times,
            w=lift_rows(trajectory.w, basis),
            p=None if trajectory.p is None else lift_rows(trajectory.p, basis),
            inputs=lift_rows(trajectory.inputs, basis),
            hamiltonian_drift=trajectory.hamiltonian_drift,
        )

    def _solve_cnlp(self, spec: ProblemSpec, mesh: int) -> SolveResult:
        reduced, basis = self._reduce(spec)
        solution = self.optimal.min_time(reduced, mesh)
        report = SolveReport(
            method=Method.CNLP.value,
            spec=spec.to_dict(),
            converged=solution.converged,
            t_f=solution.t_f,
            terminal_residual=solution.terminal_residual,
            reason=None if solution.converged else "la restricción terminal no se cumplió",
        )
        return SolveResult(
            report=report, trajectory=self._lift_continuous(solution.as_continuous(), basis)
        )

    def _solve_shoot(self, spec: ProblemSpec) -> SolveResult:
        if spec.n < 2:
            raise PreconditionError("El disparo requiere n >= 2")
        reduced, basis = self._reduce(spec)
        candidates = self.shooting.candidates(reduced)
        if not candidates:
            report = SolveReport(
                method=Method.SHOOT.value,
                spec=spec.to_dict(),
                converged=False,
                candidate_count=0,
                reason="ninguna trayectoria de disparo alcanzó w*",
            )
            return SolveResult(report=report)

        best = candidates[0]
        report = SolveReport(
            method=Method.SHOOT.value,
            spec=spec.to_dict(),
            converged=True,
            t_f=best.t_hit,
            terminal_residual=best.miss_distance,
            candidate_count=len(candidates),
        )
        return SolveResult(
            report=report, trajectory=self._lift_continuous(best.trajectory, basis)
        )

    def classify_regimes(
        self, spec: ProblemSpec, states: np.ndarray, costates: np.ndarray
    ) -> List[Regime]:
        """
        Clasifica el régimen de cada muestra (w, p) de una trayectoria.

        Args:
            spec: Instancia (define Rx y Ry)
            states: Estados (k, n)
            costates: Co-estados (k, n)

        Returns:
            Lista de regímenes
        """
        return classify_trajectory(list(states), list(costates), spec)

    def reachable_set(
        self, w: VectorLike, spec: ProblemSpec, samples: int = 360
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Ángulos y puntos de la frontera alcanzable en un paso desde w (n = 2)."""
        theta = 2.0 * np.pi * np.arange(samples) / samples
        return theta, reachable_boundary(w, spec, samples)

    def get_history(self, method: Optional[Union[Method, str]] = None) -> List[SolveReport]:
        """
        Obtiene el historial de reportes, opcionalmente filtrado por maestro.

        Args:
            method: Maestro a filtrar

        Returns:
            Lista de reportes en orden de ejecución
        """
        if method is None:
            return list(self._history)
        name = Method(method).value
        return [report for report in self._history if report.method == name]

    def get_stats(self) -> Dict:
        """
        Obtiene estadísticas de las resoluciones realizadas.

        Returns:
            Diccionario con totales, tasa de convergencia y conteo por maestro
        """
        total = len(self._history)
        converged = sum(1 for report in self._history if report.converged)
        return {
            "total_solves": total,
            "converged_solves": converged,
            "convergence_rate_percentage": round(100.0 * converged / total, 2) if total else 0,
            "solves_by_method": dict(Counter(report.method for report in self._history)),
        }


__all__ = [
    "Method",
    "SolveReport",
    "SolveResult",
    "TeachingFacade",
]
