import numpy as np
import pytest

from cuthho import study
from cuthho.cases import (
    RADIUS,
    available_cases,
    make_case,
    polynomial_case,
    verify_case,
)
from cuthho.cli import main
from cuthho.errors import ConfigError
from cuthho.levelset import Circle, interface_clear_of_boundary
from cuthho.study import (
    CSV_COLUMNS,
    conditioning_study,
    convergence_study,
    records_to_csv,
    solve_single,
)

RNG = np.random.default_rng(5)


def test_registry_names():
    names = available_cases()
    for required in ("sinsin", "contrast", "jump-neumann", "jump-dirichlet",
                     "jump-mixed", "patch-3"):
        assert required in names


def test_unknown_case():
    with pytest.raises(ConfigError, match="unknown case"):
        make_case("nope")


@pytest.mark.parametrize("name", ["sinsin", "contrast", "jump-neumann",
                                  "jump-dirichlet", "jump-mixed", "patch-2"])
def test_case_self_consistency(name):
    verify_case(make_case(name))


def test_sinsin_source_value():
    case = make_case("sinsin")
    pts = np.array([[0.3, 0.7]])
    want = 2 * np.pi**2 * np.sin(0.3 * np.pi) * np.sin(0.7 * np.pi)
    assert case.f(1, pts)[0] == pytest.approx(want, rel=1e-14)
    assert case.g_D is None and case.g_N is None


def test_radial_source_value():
    case = make_case("contrast", kappa2=100.0)
    pts = RNG.uniform(0.2, 0.8, size=(10, 2))
    rho = np.hypot(pts[:, 0] - 0.5, pts[:, 1] - 0.5)
    for i in (1, 2):
        assert np.allclose(case.f(i, pts), -36.0 * rho**4, rtol=1e-13)


def test_flux_jump_value():
    # constant flux jump 2 R^5 (3 - 4 R^2) for the neumann-jump case
    case = make_case("jump-neumann", kappa2=1e4)
    pts = np.array([[0.5 + RADIUS, 0.5]])
    nrm = np.array([[1.0, 0.0]])
    want = 2 * RADIUS**5 * (3 - 4 * RADIUS**2)
    assert case.g_N(pts, nrm)[0] == pytest.approx(want, rel=1e-14)
    assert case.g_D is None


def test_value_jump():
    case = make_case("jump-dirichlet", kappa2=1e4)
    pts = np.array([[0.5, 0.5 + RADIUS]])
    want = RADIUS**6 * (1.0 - 1e-4)
    assert case.g_D(pts)[0] == pytest.approx(want, rel=1e-14)
    assert case.g_N is None


def test_kappa_ordering_in_registry():
    with pytest.raises(ConfigError):
        make_case("contrast", kappa2=0.5)


def test_interface_clear_of_boundary():
    assert interface_clear_of_boundary(Circle((0.5, 0.5), 1 / 3))
    assert not interface_clear_of_boundary(Circle((0.5, 0.5), 0.6))


def test_inconsistent_case_rejected():
    case = make_case("sinsin")
    broken = type(case)(
        name="broken", levelset=case.levelset, kappa=case.kappa, u=case.u,
        grad_u=case.grad_u, f=lambda i, pts: np.zeros(len(pts)),
    )
    with pytest.raises(ConfigError, match="residual"):
        verify_case(broken)


# -- study runners -------------------------------------------------------

def test_convergence_rate_k1():
    recs = convergence_study("sinsin", [1], [0, 1], theta=0.3)
    assert recs[0].rate is None
    assert recs[1].rate == pytest.approx(2.0, abs=0.45)
    assert recs[1].energy_error < recs[0].energy_error


def test_csv_schema_and_determinism():
    recs1 = convergence_study("sinsin", [0], [0, 1], theta=0.3)
    recs2 = convergence_study("sinsin", [0], [0, 1], theta=0.3)
    csv1 = records_to_csv(recs1).splitlines()
    csv2 = records_to_csv(recs2).splitlines()
    assert csv1[0] == ",".join(CSV_COLUMNS)
    assert (
        csv1[0]
        == "case,k,level,r,theta,eta,kappa2,ndofs,energy_error,rate,cond,wall_time_s"
    )

    def strip_wall(lines):
        return [",".join(l.split(",")[:-1]) for l in lines]

    assert strip_wall(csv1) == strip_wall(csv2)


def test_empty_fields_for_non_applicable_columns():
    recs = conditioning_study("square", [2], [0], level=0, r=4)
    line = records_to_csv(recs).splitlines()[1]
    fields = dict(zip(CSV_COLUMNS, line.split(",")))
    assert fields["energy_error"] == ""
    assert fields["rate"] == ""
    assert float(fields["cond"]) > 1.0


def test_conditioning_circle_radius_sweep():
    recs = conditioning_study("circle", [-1, 0], [0], level=0, r=4)
    assert len(recs) == 2
    assert all(r.cond and r.cond > 1 for r in recs)
    assert recs[0].case == "circle[i=-1]"


def test_conditioning_square_far_away_is_uncut():
    # a huge shift keeps the interface outside every cell
    from cuthho.geometry import build_cut_mesh
    from cuthho.levelset import Square
    from cuthho.mesh import build_mesh

    cm = build_cut_mesh(build_mesh(0), Square(delta=5.0), theta=0.3, r=2)
    assert not cm.cut_cells()


def test_solve_single_patch():
    case = polynomial_case(1)
    rec, system, x = solve_single(case, 1, 0, theta=0.3)
    assert rec.energy_error <= 1e-10
    assert rec.ndofs == int(system.free.sum())


def test_errors_decrease_with_level():
    recs = convergence_study("sinsin", [0, 1], [0, 1], theta=0.3)
    by_k = {}
    for r in recs:
        by_k.setdefault(r.k, []).append(r.energy_error)
    for k, errs in by_k.items():
        assert errs[1] < errs[0]


# -- CLI -----------------------------------------------------------------

def test_cli_solve_writes_csv(tmp_path):
    out = tmp_path / "run.csv"
    code = main([
        "solve", "--case", "patch-0", "--k", "0", "--level", "0",
        "--out", str(out),
    ])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("case,k,level")
    assert lines[1].startswith("patch-0,0,0,")


def test_cli_dumps_and_matrix_export(tmp_path):
    svg = tmp_path / "cuts.svg"
    csvd = tmp_path / "cuts.csv"
    mtx = tmp_path / "mat.mtx"
    code = main([
        "solve", "--case", "sinsin", "--k", "0", "--level", "0",
        "--dump-cuts", str(svg), "--export-matrix", str(mtx),
        "--out", str(tmp_path / "o.csv"),
    ])
    assert code == 0
    assert svg.read_text().startswith("<svg")
    code = main([
        "solve", "--case", "sinsin", "--k", "0", "--level", "0",
        "--dump-cuts", str(csvd), "--out", str(tmp_path / "o2.csv"),
    ])
    assert code == 0
    assert csvd.read_text().startswith("cell,kind")
    assert mtx.read_text().startswith("%%MatrixMarket")


def test_cli_exit_code_numerical_failure(capsys):
    # theta close to 1 makes central cuts fail on both sides
    code = main(["solve", "--case", "sinsin", "--k", "0", "--level", "0",
                 "--theta", "0.95"])
    assert code == 3
    assert "both sides ill-cut" in capsys.readouterr().err


def test_cli_exit_code_bad_config():
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--case", "not-a-case", "--k", "0", "--level", "0"])
    assert exc.value.code == 2


def test_cli_study_conditioning(tmp_path):
    out = tmp_path / "cond.csv"
    code = main([
        "study", "conditioning", "--interface", "square", "--sweep", "2,3",
        "--k", "0", "--level", "0", "--out", str(out),
    ])
    assert code == 0
    assert len(out.read_text().splitlines()) == 3


def test_cli_study_theta(tmp_path):
    out = tmp_path / "theta.csv"
    code = main([
        "study", "theta", "--case", "sinsin", "--theta", "0,0.3", "--k", "0",
        "--levels", "0", "--out", str(out),
    ])
    assert code == 0
    assert len(out.read_text().splitlines()) == 3
