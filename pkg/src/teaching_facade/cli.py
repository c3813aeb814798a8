"""
Comando `teach` - Interfaz de línea de comandos del Teaching Facade.

Uso:
    teach --method nlp --w0 0,1 --wstar 1,0 --eta 0.4 --out t.csv --report r.json
    teach regimes --trajectory t.csv --costates p.csv --out regimes.csv
    teach reachable --w0 0,1 --wstar 1,0 --eta 0.1 --samples 360 --out boundary.csv
    teach --method greedy --w0 -1.5,0.5 --wstar 1,0 --eta 0.01

Los vectores que empiezan con signo menos se aceptan separados (`--w0 -1.5,0.5`)
o con la forma `--w0=-1.5,0.5`.

Códigos de salida: 0 convergencia, 2 no convergencia o error de E/S,
1 error de uso.
"""

import argparse
import logging
import re
import sys
from typing import List, NoReturn, Optional, Sequence, Union

import numpy as np

from .exceptions import TeachingError
from .facade import Method, SolveResult, TeachingFacade
from .services.problem import ProblemSpec, Trajectory
from .services.reporting import (
    read_costates_csv,
    read_trajectory_csv,
    write_costates_csv,
    write_reachable_csv,
    write_regimes_csv,
    write_report_json,
    write_trajectory_csv,
)
from .services.shooting import ContinuousTrajectory, ShootingService, ShootingSettings
from .services.teachers_opt import NlpSettings, OptimalTeacherService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAILED = 2

SUBCOMMANDS = ("regimes", "reachable")
VECTOR_OPTIONS = ("--w0", "--wstar", "--at")
_NEGATIVE_VECTOR = re.compile(r"^-(\d|\.\d)")


class UsageError(Exception):
    """Argumentos inválidos detectados después del parseo."""


class _Parser(argparse.ArgumentParser):
    """ArgumentParser que sale con código 1 ante un error de uso."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_vector(text: str) -> List[float]:
    """Convierte '0,1.5,-2' en una lista de reales."""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"vector inválido: {text!r}") from error
    if not values:
        raise argparse.ArgumentTypeError("el vector no puede estar vacío")
    return values


def join_vector_values(argv: Sequence[str]) -> List[str]:
    """Une `--w0 -1.5,0.5` en `--w0=-1.5,0.5` para que argparse no lo tome como opción."""
    joined: List[str] = []
    i = 0
    while i < len(argv):
        token = argv[i]
        if token in VECTOR_OPTIONS and i + 1 < len(argv) and _NEGATIVE_VECTOR.match(argv[i + 1]):
            joined.append(f"{token}={argv[i + 1]}")
            i += 2
            continue
        joined.append(token)
        i += 1
    return joined


def _add_spec_arguments(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--w0", type=parse_vector, required=required, help="estado inicial")
    parser.add_argument("--wstar", type=parse_vector, required=required, help="objetivo")
    parser.add_argument("--eta", type=float, default=None, help="tasa de aprendizaje")
    parser.add_argument("--rx", type=float, default=1.0, help="cota de ‖x‖")
    parser.add_argument("--ry", type=float, default=1.0, help="cota de |y|")
    parser.add_argument("-v", "--verbose", action="store_true", help="registro INFO")


def build_parser() -> argparse.ArgumentParser:
    """Parser del comando principal."""
    parser = _Parser(prog="teach", description="Secuencias de enseñanza para un aprendiz GD.")
    parser.add_argument(
        "--method", choices=[m.value for m in Method], default=Method.NLP.value
    )
    _add_spec_arguments(parser)
    parser.add_argument("--out", help="CSV de trayectoria")
    parser.add_argument("--report", help="reporte JSON")
    parser.add_argument("--costate-out", help="CSV de co-estados (solo shoot)")
    parser.add_argument("--max-steps", type=int, default=100000)
    parser.add_argument("--tol", type=float, default=None)
    parser.add_argument("--mesh", type=int, default=100, metavar="K")
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)
    return parser


def build_regimes_parser() -> argparse.ArgumentParser:
    """Parser del subcomando `regimes`."""
    parser = _Parser(
        prog="teach regimes",
        description="Clasifica regímenes a lo largo de una trayectoria.",
    )
    parser.add_argument("--trajectory", required=True, help="CSV de trayectoria")
    parser.add_argument("--costates", required=True, help="CSV de co-estados")
    parser.add_argument("--rx", type=float, default=1.0)
    parser.add_argument("--ry", type=float, default=1.0)
    parser.add_argument("--out", required=True, help="CSV de regímenes")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def build_reachable_parser() -> argparse.ArgumentParser:
    """Parser del subcomando `reachable`."""
    parser = _Parser(prog="teach reachable", description="Frontera alcanzable en un paso.")
    _add_spec_arguments(parser)
    parser.add_argument(
        "--at", type=parse_vector, default=None, help="estado de partida (por defecto w0)"
    )
    parser.add_argument("--samples", type=int, default=360)
    parser.add_argument("--out", required=True, help="CSV de la frontera")
    return parser


def _spec_from_args(args: argparse.Namespace) -> ProblemSpec:
    if args.eta is None:
        raise UsageError("--eta es obligatorio")
    try:
        return ProblemSpec(args.w0, args.wstar, args.eta, rx=args.rx, ry=args.ry)
    except TeachingError as error:
        raise UsageError(str(error)) from error


def emit_trajectory(
    trajectory: Union[Trajectory, ContinuousTrajectory], path: str, ry: float
) -> None:
    """Escribe la trayectoria en CSV; las continuas usan y = Ry."""
    write_trajectory_csv(path, trajectory, ry=ry)
    print(f"✓ Trayectoria escrita en {path}")


def _print_summary(result: SolveResult) -> None:
    report = result.report
    status = "✓ convergió" if report.converged else "✗ no convergió"
    print(f"[{report.method}] {status}")
    if report.T is not None:
        print(f"  T = {report.T}")
    if report.t_f is not None:
        print(f"  t_f = {report.t_f:.6f}")
    if report.terminal_residual is not None:
        print(f"  residuo terminal = {report.terminal_residual:.3e}")
    if report.candidate_count is not None:
        print(f"  candidatos = {report.candidate_count}")
    if report.reason:
        print(f"  razón: {report.reason}")
    print(f"  tiempo = {report.wall_time_seconds:.3f} s")


def run(args: argparse.Namespace) -> int:
    """
    Ejecuta el maestro pedido y escribe sus salidas.

    Args:
        args: Argumentos ya parseados del comando principal

    Returns:
        Código de salida
    """
    spec = _spec_from_args(args)
    if args.max_steps < 1 or args.mesh < 10 or args.dt <= 0:
        raise UsageError("--max-steps >= 1, --mesh >= 10 y --dt > 0 son obligatorios")
    if args.tol is not None and args.tol <= 0:
        raise UsageError("--tol debe ser positivo")

    facade = TeachingFacade(
        optimal=OptimalTeacherService(nlp_settings=NlpSettings(seed=args.seed)),
        shooting=ShootingService(ShootingSettings(dt=args.dt)),
    )
    result = facade.solve(
        args.method, spec, max_steps=args.max_steps, tol=args.tol, mesh=args.mesh
    )
    _print_summary(result)

    try:
        if args.out and result.trajectory is not None:
            emit_trajectory(result.trajectory, args.out, spec.ry)
        if args.costate_out:
            trajectory = result.trajectory
            if isinstance(trajectory, ContinuousTrajectory) and trajectory.p is not None:
                write_costates_csv(args.costate_out, trajectory)
            else:
                logger.warning("[Facade] %s no produce co-estados", args.method)
        if args.report:
            write_report_json(args.report, result.report.to_dict())
    except OSError as error:
        print(f"✗ Error de escritura: {error}", file=sys.stderr)
        return EXIT_FAILED

    return EXIT_OK if result.report.converged else EXIT_FAILED


def regimes(args: argparse.Namespace) -> int:
    """Clasifica cada muestra (w, p) leída de disco y escribe las etiquetas."""
    try:
        table = read_trajectory_csv(args.trajectory)
        times, costates = read_costates_csv(args.costates)
    except OSError as error:
        print(f"✗ Error de lectura: {error}", file=sys.stderr)
        return EXIT_FAILED
    if table.states.shape != costates.shape or table.states.shape[0] == 0:
        raise UsageError("la trayectoria y los co-estados no coinciden")

    try:
        spec = ProblemSpec(table.states[0], table.states[-1], 1.0, rx=args.rx, ry=args.ry)
    except TeachingError as error:
        raise UsageError(str(error)) from error
    labels = TeachingFacade().classify_regimes(spec, table.states, costates)

    try:
        write_regimes_csv(args.out, times, [label.value for label in labels])
    except OSError as error:
        print(f"✗ Error de escritura: {error}", file=sys.stderr)
        return EXIT_FAILED
    sequence = [labels[0].value] + [
        b.value for a, b in zip(labels, labels[1:]) if a is not b
    ]
    print(f"✓ Regímenes: {' -> '.join(sequence)}")
    return EXIT_OK


def reachable(args: argparse.Namespace) -> int:
    """Muestrea la frontera alcanzable en un paso y la escribe en CSV."""
    spec = _spec_from_args(args)
    if args.samples < 1:
        raise UsageError("--samples debe ser positivo")
    if spec.n != 2:
        raise UsageError("reachable requiere vectores de dimensión 2")
    start = args.at if args.at is not None else spec.w0
    theta, points = TeachingFacade().reachable_set(
        np.asarray(start, dtype=float), spec, args.samples
    )
    try:
        write_reachable_csv(args.out, theta, points)
    except OSError as error:
        print(f"✗ Error de escritura: {error}", file=sys.stderr)
        return EXIT_FAILED
    print(f"✓ {len(theta)} puntos escritos en {args.out}")
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Punto de entrada del comando `teach`."""
    argv = join_vector_values(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in SUBCOMMANDS:
        name, argv = argv[0], argv[1:]
        parser = build_regimes_parser() if name == "regimes" else build_reachable_parser()
        handler = regimes if name == "regimes" else reachable
    else:
        parser = build_parser()
        handler = run

    args = parser.parse_args(argv)
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    try:
        return handler(args)
    except UsageError as error:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {error}", file=sys.stderr)
        return EXIT_USAGE
    except TeachingError as error:
        print(f"✗ {error}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
