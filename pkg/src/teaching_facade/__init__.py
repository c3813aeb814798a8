"""
Teaching Facade - Secuencias de enseñanza de tiempo mínimo para un aprendiz GD.

Este paquete aplica el patrón Facade sobre los servicios que resuelven el
problema de enseñanza: heurísticas GREEDY y STRAIGHT, el maestro discreto
NLP, el maestro continuo CNLP, el análisis de regímenes y el disparo sobre
las condiciones necesarias de optimalidad.
"""

from .facade import Method, SolveReport, SolveResult, TeachingFacade
from .services.problem import ProblemSpec, TeachingInput, Trajectory

__version__ = "1.0.0"
__all__ = [
    "Method",
    "ProblemSpec",
    "SolveReport",
    "SolveResult",
    "TeachingFacade",
    "TeachingInput",
    "Trajectory",
]
