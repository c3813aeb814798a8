"""
Tests unitarios para el patrón Facade - Teaching Facade.

Este módulo valida la orquestación de los maestros, la conversión de
errores en reportes, el historial y el comando `teach`.
"""

import json

import numpy as np
import pytest

from teaching_facade import Method, ProblemSpec, TeachingFacade, Trajectory
from teaching_facade.cli import (
    EXIT_FAILED,
    EXIT_OK,
    EXIT_USAGE,
    join_vector_values,
    main,
    parse_vector,
)
from teaching_facade.services.heuristics import HeuristicService, TeacherKind, TeacherPolicy
from teaching_facade.services.pmp import Regime
from teaching_facade.services.reporting import read_costates_csv, read_trajectory_csv
from teaching_facade.services.shooting import ShootingService, ShootingSettings
from teaching_facade.services.teachers_opt import NlpSettings, OptimalTeacherService


@pytest.fixture
def facade():
    """Fixture para crear una instancia de TeachingFacade."""
    return TeachingFacade()


class TestTeachingFacade:
    """Tests del facade de enseñanza."""

    @pytest.mark.parametrize("method", [Method.GREEDY, Method.STRAIGHT, "straight"])
    def test_heuristics_converge(self, facade, unit_spec, method):
        """Las heurísticas convergen y reportan T y el residuo."""
        result = facade.solve(method, unit_spec)
        report = result.report
        assert report.converged is True
        assert isinstance(result.trajectory, Trajectory)
        assert report.T == result.trajectory.steps
        assert report.terminal_residual <= 1e-3
        assert report.reason is None
        assert report.wall_time_seconds >= 0.0
        assert report.spec["w0"] == [0.0, 1.0]

    def test_heuristic_max_steps(self, facade, unit_spec):
        """Agotar max_steps se reporta sin convergencia."""
        report = facade.solve(Method.STRAIGHT, unit_spec, max_steps=1).report
        assert report.converged is False
        assert report.T == 1
        assert "max_steps" in report.reason

    def test_injected_policy(self, unit_spec):
        """La política GREEDY inyectada es la que se usa."""
        heuristics = HeuristicService(greedy_policy=TeacherPolicy(TeacherKind.STRAIGHT))
        facade = TeachingFacade(heuristics=heuristics)
        greedy = facade.solve(Method.GREEDY, unit_spec).trajectory
        straight = facade.solve(Method.STRAIGHT, unit_spec).trajectory
        assert np.array_equal(greedy.states, straight.states)

    def test_nlp_certificate(self, facade, unit_spec):
        """El NLP entrega una trayectoria re-simulable que llega a w*."""
        result = facade.solve(Method.NLP, unit_spec)
        assert result.report.converged is True
        assert result.report.T == result.trajectory.steps
        assert result.trajectory.replay_error() == 0.0
        assert result.trajectory.terminal_residual <= 1e-6

    def test_nlp_not_worse_than_straight(self, facade, unit_spec):
        """El T óptimo nunca supera al de STRAIGHT."""
        nlp = facade.solve(Method.NLP, unit_spec).report.T
        assert nlp <= facade.solve(Method.STRAIGHT, unit_spec).report.T

    def test_nlp_lifted_to_original_dimension(self, facade):
        """En n = 3 el NLP resuelve en el plano y levanta la trayectoria."""
        spec = ProblemSpec([0.0, 0.6, 0.8], [1.0, 0.0, 0.0], 0.4)
        result = facade.solve(Method.NLP, spec)
        assert result.report.converged is True
        assert result.trajectory.states.shape == (result.report.T + 1, 3)
        assert result.trajectory.terminal_residual <= 1e-6
        assert all(spec.is_admissible(u) for u in result.trajectory.inputs)

    def test_solver_error_becomes_report(self, unit_spec):
        """Un SolverError se convierte en reporte con la razón."""
        optimal = OptimalTeacherService(nlp_settings=NlpSettings(max_straight_steps=1))
        facade = TeachingFacade(optimal=optimal)
        result = facade.solve(Method.NLP, unit_spec)
        assert result.report.converged is False
        assert result.trajectory is None
        assert "STRAIGHT" in result.report.reason

    def test_shoot_requires_plane(self, facade):
        """El disparo en n = 1 se reporta como fallido."""
        spec = ProblemSpec([0.5], [1.0], 0.1)
        report = facade.solve(Method.SHOOT, spec).report
        assert report.converged is False
        assert "n >= 2" in report.reason

    def test_injected_shooting(self, unit_spec):
        """Un servicio de disparo grueso inyectado encuentra t_f ≈ 1.52."""
        shooting = ShootingService(
            ShootingSettings(angle_samples=24, dt=1e-2, t_max=2.5, hit_tol=0.05)
        )
        facade = TeachingFacade(shooting=shooting)
        assert facade.shooting is shooting
        result = facade.solve(Method.SHOOT, unit_spec)
        assert result.report.converged
        assert result.report.candidate_count >= 1
        assert result.report.t_f == pytest.approx(1.52, rel=3e-2)

    def test_unknown_method(self, facade, unit_spec):
        """Un maestro desconocido es un error del llamador."""
        with pytest.raises(ValueError):
            facade.solve("simulated-annealing", unit_spec)

    def test_history_and_stats(self, facade, unit_spec):
        """El historial y las estadísticas siguen cada resolución."""
        facade.solve(Method.STRAIGHT, unit_spec)
        facade.solve(Method.STRAIGHT, unit_spec, max_steps=1)
        facade.solve(Method.GREEDY, unit_spec)

        assert len(facade.get_history()) == 3
        assert len(facade.get_history(Method.STRAIGHT)) == 2
        assert len(facade.get_history("greedy")) == 1

        stats = facade.get_stats()
        assert stats["total_solves"] == 3
        assert stats["converged_solves"] == 2
        assert stats["convergence_rate_percentage"] == pytest.approx(66.67)
        assert stats["solves_by_method"] == {"straight": 2, "greedy": 1}

    def test_empty_stats(self, facade):
        """Sin resoluciones la tasa es cero."""
        assert facade.get_stats()["convergence_rate_percentage"] == 0

    def test_report_to_dict(self, facade, unit_spec):
        """El reporte serializable contiene todos los campos."""
        data = facade.solve(Method.STRAIGHT, unit_spec).report.to_dict()
        assert set(data) == {
            "method",
            "spec",
            "converged",
            "T",
            "t_f",
            "terminal_residual",
            "wall_time_seconds",
            "candidate_count",
            "reason",
        }
        assert data["t_f"] is None

    def test_classify_regimes(self, facade):
        """Clasifica un recorrido alineado."""
        spec = ProblemSpec([-0.5, 0.0], [1.0, 0.0], 0.1)
        states = np.array([[-0.5, 0.0], [0.0, 0.0], [0.3, 0.0], [1.0, 0.0]])
        labels = facade.classify_regimes(spec, states, np.tile([-1.0, 0.0], (4, 1)))
        assert labels == [
            Regime.POSITIVE_ALIGNED,
            Regime.ORIGIN,
            Regime.NEG_ALIGNED_INSIDE,
            Regime.NEG_ALIGNED_OUTSIDE,
        ]

    def test_reachable_set(self, facade, unit_spec):
        """Ángulos uniformes y puntos en la frontera."""
        theta, points = facade.reachable_set(unit_spec.w0, unit_spec, samples=12)
        assert theta.shape == (12,)
        assert points.shape == (12, 2)
        assert theta[1] == pytest.approx(np.pi / 6)


class TestCli:
    """Tests del comando `teach`."""

    def spec_args(self, *extra):
        return ["--w0", "0,1", "--wstar", "1,0", "--eta", "0.4", *extra]

    def test_parse_vector(self):
        """Vectores separados por comas."""
        assert parse_vector("0, 1.5,-2") == [0.0, 1.5, -2.0]

    def test_straight_outputs(self, tmp_path, capsys):
        """CSV y reporte JSON de una ejecución convergente."""
        out, report = tmp_path / "t.csv", tmp_path / "r.json"
        argv = ["--method", "straight", *self.spec_args("--out", str(out))]
        argv += ["--report", str(report)]
        code = main(argv)
        assert code == EXIT_OK
        assert "convergió" in capsys.readouterr().out

        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["method"] == "straight"
        assert data["converged"] is True
        assert data["spec"]["eta"] == 0.4

        header = out.read_text(encoding="utf-8").splitlines()[0]
        assert header == "step,t,w1,w2,x1,x2,y"
        table = read_trajectory_csv(out)
        assert table.states.shape[0] == data["T"] + 1
        assert table.times[1] == pytest.approx(0.4)
        assert np.isnan(table.labels[-1])

        replayed = table.to_trajectory(0.4, [1.0, 0.0])
        assert np.max(np.abs(replayed.states - table.states)) <= 1e-12

    def test_negative_vector_with_equals(self, tmp_path):
        """Los vectores negativos se pasan con la forma --w0=..."""
        out = tmp_path / "t.csv"
        argv = ["--method", "straight", "--w0=-1.5,0.5", "--wstar", "1,0", "--eta", "0.4"]
        code = main([*argv, "--out", str(out)])
        assert code == EXIT_OK
        assert read_trajectory_csv(out).states[0] == pytest.approx([-1.5, 0.5])

    def test_negative_vector_separated(self, tmp_path):
        """Un vector negativo también se acepta como argumento separado."""
        out = tmp_path / "t.csv"
        argv = ["--method", "straight", "--w0", "-1.5,0.5", "--wstar", "1,0", "--eta", "0.4"]
        assert main([*argv, "--out", str(out)]) == EXIT_OK
        assert read_trajectory_csv(out).states[0] == pytest.approx([-1.5, 0.5])

    def test_join_vector_values(self):
        """Solo se unen las opciones vectoriales seguidas de un valor negativo."""
        argv = ["--w0", "-1.5,0.5", "--wstar", "1,0", "--eta", "-1", "--at", "-.5,1"]
        assert join_vector_values(argv) == [
            "--w0=-1.5,0.5",
            "--wstar",
            "1,0",
            "--eta",
            "-1",
            "--at=-.5,1",
        ]

    def test_not_converged(self):
        """Sin convergencia el código es 2."""
        assert main(["--method", "straight", *self.spec_args(), "--max-steps", "1"]) == EXIT_FAILED

    def test_failed_report_is_written(self, tmp_path):
        """El reporte se escribe también cuando el maestro falla."""
        report = tmp_path / "r.json"
        spec = ["--w0", "0.5", "--wstar", "1", "--eta", "0.1"]
        assert main(["--method", "shoot", *spec, "--report", str(report)]) == EXIT_FAILED
        data = json.loads(report.read_text(encoding="utf-8"))
        assert data["converged"] is False
        assert data["reason"]

    @pytest.mark.parametrize(
        "argv",
        [
            ["--w0", "0,1", "--wstar", "1,0"],
            ["--w0", "0,1", "--wstar", "1,0", "--eta", "-1"],
            ["--w0", "0,1", "--wstar", "1,0,0", "--eta", "0.4"],
            ["--w0", "0,1", "--wstar", "1,0", "--eta", "0.4", "--mesh", "5"],
            ["--w0", "0,1", "--wstar", "1,0", "--eta", "0.4", "--tol", "0"],
        ],
    )
    def test_usage_errors(self, argv, capsys):
        """Parámetros inválidos salen con código 1."""
        assert main(argv) == EXIT_USAGE
        assert "error" in capsys.readouterr().err

    @pytest.mark.parametrize(
        "argv",
        [
            ["--w0", "0,1", "--wstar", "1,0", "--eta", "0.4", "--bogus"],
            ["--method", "annealing", "--w0", "0,1", "--wstar", "1,0", "--eta", "0.4"],
            ["--w0", "a,b", "--wstar", "1,0", "--eta", "0.4"],
        ],
    )
    def test_parser_errors(self, argv):
        """Los errores de argparse también usan el código 1."""
        with pytest.raises(SystemExit) as excinfo:
            main(argv)
        assert excinfo.value.code == EXIT_USAGE

    def test_unwritable_output(self, tmp_path):
        """Un error de escritura sale con código 2."""
        missing = tmp_path / "no-existe" / "t.csv"
        argv = ["--method", "straight", *self.spec_args("--out", str(missing))]
        assert main(argv) == EXIT_FAILED

    def test_regimes_subcommand(self, tmp_path, capsys):
        """`teach regimes` etiqueta cada muestra de disco."""
        trajectory = tmp_path / "t.csv"
        trajectory.write_text(
            "step,t,w1,w2,x1,x2,y\n"
            "0,0,-0.5,0,1,0,1\n"
            "1,0.1,0,0,1,0,1\n"
            "2,0.2,0.3,0,1,0,1\n"
            "3,0.3,1,0,1,0,1\n",
            encoding="utf-8",
        )
        costates = tmp_path / "p.csv"
        costates.write_text(
            "step,t,p1,p2\n0,0,-1,0\n1,0.1,-1,0\n2,0.2,-1,0\n3,0.3,-1,0\n",
            encoding="utf-8",
        )
        out = tmp_path / "regimes.csv"
        code = main(
            [
                "regimes",
                "--trajectory",
                str(trajectory),
                "--costates",
                str(costates),
                "--out",
                str(out),
            ]
        )
        assert code == EXIT_OK
        assert "II -> I -> III -> IV" in capsys.readouterr().out
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "step,t,regime"
        assert [line.split(",")[2] for line in lines[1:]] == ["II", "I", "III", "IV"]

    def test_regimes_length_mismatch(self, tmp_path):
        """Trayectoria y co-estados de distinto largo son un error de uso."""
        trajectory = tmp_path / "t.csv"
        trajectory.write_text("step,t,w1,w2,x1,x2,y\n0,0,1,0,,,\n1,0.1,2,0,,,\n", encoding="utf-8")
        costates = tmp_path / "p.csv"
        costates.write_text("step,t,p1,p2\n0,0,-1,0\n", encoding="utf-8")
        argv = ["regimes", "--trajectory", str(trajectory), "--costates", str(costates)]
        assert main([*argv, "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE

    def test_regimes_header_only(self, tmp_path):
        """Archivos sin filas son un error de uso, no una excepción."""
        trajectory = tmp_path / "t.csv"
        trajectory.write_text("step,t,w1,w2,x1,x2,y\n", encoding="utf-8")
        costates = tmp_path / "p.csv"
        costates.write_text("step,t,p1,p2\n", encoding="utf-8")

        times, values = read_costates_csv(costates)
        assert times.shape == (0,)
        assert values.shape == (0, 2)

        argv = ["regimes", "--trajectory", str(trajectory), "--costates", str(costates)]
        assert main([*argv, "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE

    def test_regimes_missing_file(self, tmp_path):
        """Un archivo inexistente sale con código 2."""
        argv = ["regimes", "--trajectory", str(tmp_path / "nada.csv")]
        argv += ["--costates", str(tmp_path / "p.csv"), "--out", str(tmp_path / "r.csv")]
        assert main(argv) == EXIT_FAILED

    def test_reachable_subcommand(self, tmp_path):
        """`teach reachable` escribe una fila por ángulo."""
        out = tmp_path / "boundary.csv"
        code = main(["reachable", *self.spec_args(), "--samples", "8", "--out", str(out)])
        assert code == EXIT_OK
        lines = out.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "k,theta,w1,w2"
        assert len(lines) == 9

    def test_reachable_requires_plane(self, tmp_path):
        """`teach reachable` solo trabaja en 2D."""
        argv = ["reachable", "--w0", "0,1,0", "--wstar", "1,0,0", "--eta", "0.1"]
        argv += ["--out", str(tmp_path / "b.csv")]
        assert main(argv) == EXIT_USAGE
