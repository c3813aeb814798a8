"""
Servicio de Reportes - Archivos CSV y JSON de trayectorias y resultados.

Formatos:
    trayectoria   step,t,w1..wn,x1..xn,y
    co-estados    step,t,p1..pn
    alcanzable    k,theta,w1,w2
    regímenes     step,t,regime
    reporte       un objeto JSON UTF-8

Los números se escriben con 17 dígitos significativos.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import DimensionMismatchError, PreconditionError
from .problem import TeachingInput, Trajectory, replay
from .shooting import ContinuousTrajectory

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _trajectory_header(n: int) -> List[str]:
    return (
        ["step", "t"]
        + [f"w{i + 1}" for i in range(n)]
        + [f"x{i + 1}" for i in range(n)]
        + ["y"]
    )


@dataclass(frozen=True, eq=False)
class TrajectoryTable:
    """Contenido de un CSV de trayectoria; x e y valen NaN en la fila terminal."""

    steps: np.ndarray
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    labels: np.ndarray

    def to_trajectory(self, eta: float, w_star: Sequence[float]) -> Trajectory:
        """Re-simula las entradas desde el primer estado."""
        rows = [
            TeachingInput(x, y)
            for x, y in zip(self.inputs, self.labels)
            if not np.isnan(y)
        ]
        return replay(self.states[0], rows, eta, w_star)


def write_trajectory_csv(
    path: PathLike,
    trajectory: Union[Trajectory, ContinuousTrajectory],
    ry: Optional[float] = None,
) -> None:
    """
    Escribe una trayectoria discreta o continua.

    Las trayectorias discretas usan t = step·eta y dejan vacías x e y en la
    fila terminal. Las continuas usan sus tiempos de muestreo y requieren
    `ry` para la columna y.

    Args:
        path: Archivo de destino
        trajectory: Trajectory o ContinuousTrajectory
        ry: Etiqueta de las trayectorias continuas
    """
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        if isinstance(trajectory, Trajectory):
            states = trajectory.states
            n = states.shape[1]
            writer.writerow(_trajectory_header(n))
            for step, w in enumerate(states):
                row = [str(step), _fmt(step * trajectory.eta)] + [_fmt(v) for v in w]
                if step < trajectory.steps:
                    u = trajectory.inputs[step]
                    row += [_fmt(v) for v in u.x] + [_fmt(u.y)]
                else:
                    row += [""] * (n + 1)
                writer.writerow(row)
        else:
            if ry is None:
                raise PreconditionError("Las trayectorias continuas requieren ry")
            n = trajectory.w.shape[1]
            writer.writerow(_trajectory_header(n))
            for k in range(trajectory.samples):
                writer.writerow(
                    [str(k), _fmt(trajectory.times[k])]
                    + [_fmt(v) for v in trajectory.w[k]]
                    + [_fmt(v) for v in trajectory.inputs[k]]
                    + [_fmt(ry)]
                )
    logger.debug("[Reporting] trayectoria escrita en %s", path)


def read_trajectory_csv(path: PathLike) -> TrajectoryTable:
    """
    Lee un CSV de trayectoria.

    Args:
        path: Archivo de origen

    Returns:
        TrajectoryTable con NaN en las celdas vacías
    """
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [row for row in reader if row]

    n = (len(header) - 3) // 2
    if header != _trajectory_header(n):
        raise DimensionMismatchError(f"Cabecera de trayectoria inválida: {header}")

    def number(cell: str) -> float:
        return float(cell) if cell != "" else math.nan

    table = np.array([[number(cell) for cell in row] for row in rows], dtype=float)
    if table.size == 0:
        table = np.zeros((0, len(header)))
    return TrajectoryTable(
        steps=table[:, 0].astype(int),
        times=table[:, 1],
        states=table[:, 2 : 2 + n],
        inputs=table[:, 2 + n : 2 + 2 * n],
        labels=table[:, 2 + 2 * n],
    )


def write_costates_csv(path: PathLike, trajectory: ContinuousTrajectory) -> None:
    """Escribe los co-estados de una trayectoria de disparo."""
    if trajectory.p is None:
        raise PreconditionError("La trayectoria no tiene co-estados")
    n = trajectory.p.shape[1]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "t"] + [f"p{i + 1}" for i in range(n)])
        for k in range(trajectory.samples):
            writer.writerow(
                [str(k), _fmt(trajectory.times[k])] + [_fmt(v) for v in trajectory.p[k]]
            )


def read_costates_csv(path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """Lee un CSV de co-estados y devuelve (tiempos, co-estados)."""
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        rows = [row for row in reader if row]
    if header[:2] != ["step", "t"] or not all(h.startswith("p") for h in header[2:]):
        raise DimensionMismatchError(f"Cabecera de co-estados inválida: {header}")
    table = np.array([[float(cell) for cell in row] for row in rows], dtype=float)
    if table.size == 0:
        table = np.zeros((0, len(header)))
    return table[:, 1], table[:, 2:]


def write_report_json(path: PathLike, report: Dict) -> None:
    """Escribe un reporte como un único objeto JSON."""
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report, handle, ensure_ascii=False, indent=2, sort_keys=True)
        handle.write("\n")


def write_reachable_csv(path: PathLike, theta: np.ndarray, points: np.ndarray) -> None:
    """Escribe muestras de la frontera del conjunto alcanzable en un paso."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["k", "theta", "w1", "w2"])
        for k, (angle, point) in enumerate(zip(theta, points)):
            writer.writerow([str(k), _fmt(angle), _fmt(point[0]), _fmt(point[1])])


def write_regimes_csv(path: PathLike, times: np.ndarray, labels: Sequence[str]) -> None:
    """Escribe la etiqueta de régimen de cada muestra."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(["step", "t", "regime"])
        for k, (t, label) in enumerate(zip(times, labels)):
            writer.writerow([str(k), _fmt(t), label])
