"""Archivo de configuración para pytest."""

import os
import sys

import numpy as np
import pytest

# Agregar el directorio src al Python path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from teaching_facade.services.problem import ProblemSpec  # noqa: E402


@pytest.fixture
def unit_spec():
    """Instancia de referencia: w0 = (0, 1), w* = (1, 0), eta = 0.4."""
    return ProblemSpec([0.0, 1.0], [1.0, 0.0], 0.4)


@pytest.fixture
def rng():
    """Generador con semilla fija."""
    return np.random.default_rng(1234)
