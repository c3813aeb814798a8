"""
Errores del dominio de enseñanza.

Todas las excepciones heredan de TeachingError, que a su vez es un
ValueError, para que el facade pueda capturarlas en un solo punto.
"""


class TeachingError(ValueError):
    """Error base de la biblioteca."""


class DimensionMismatchError(TeachingError):
    """Las dimensiones de los vectores no coinciden."""


class PreconditionError(TeachingError):
    """Se violó una precondición documentada de la operación."""


class SolverError(TeachingError):
    """Un solver numérico no puede continuar (valores no finitos, colapso, etc.)."""
