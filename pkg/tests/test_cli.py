import json
import math
from functools import partial

import pytest

from pfk import cli
from pfk.discretize import load_csv
from pfk.spectral import SolverOptions, bessel_zero
from pfk.verify import CSV_HEADER

RECT = '{"type":"rectangle","a":1,"b":1}'
DISK = '{"type":"ball","n":2,"r":1}'


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def value(out, key):
    for line in out.splitlines():
        if line.startswith(key):
            return float(line.split()[-1])
    raise AssertionError(f"{key} not in output:\n{out}")


@pytest.fixture
def catalog(tmp_path):
    doc = {
        "domains": [
            {"name": "square", "domain": json.loads(RECT)},
            {"name": "disk", "domain": json.loads(DISK)},
        ],
        "p_list": [3.0],
        "resolution": 24,
        "tolerances": {"mazya_lower": 0.05},
    }
    path = tmp_path / "catalog.json"
    path.write_text(json.dumps(doc))
    return path


def test_eig_radial(capsys):
    code, out, _ = run(capsys, "eig", "--domain", DISK, "--p", "2", "--method", "radial")
    assert code == 0
    assert value(out, "lambda") == pytest.approx(bessel_zero(0, 1) ** 2, abs=1e-8)
    assert "5.783185" in out


def test_eig_square_grid(capsys):
    code, out, _ = run(capsys, "eig", "--domain", RECT, "--p", "2")
    assert code == 0
    assert value(out, "lambda") == pytest.approx(2 * math.pi**2, rel=0.01)
    assert value(out, "iterations") >= 1


def test_eig_writes_eigenfunction(capsys, tmp_path):
    out_csv = tmp_path / "u.csv"
    code, _, _ = run(capsys, "eig", "--domain", "rectangle(2,1)", "--p", "3", "--resolution", "16", "--out", str(out_csv))
    assert code == 0
    f = load_csv(out_csv)
    assert f.values.shape == (18, 10)
    assert f.max_abs() > 0


def test_eig_domain_from_file(capsys, tmp_path):
    path = tmp_path / "d.json"
    path.write_text(DISK)
    code, out, _ = run(capsys, "eig", "--domain", f"@{path}", "--p", "2", "--method", "radial")
    assert code == 0


@pytest.mark.parametrize(
    "argv,msg",
    [
        (["eig", "--domain", DISK, "--p", "0.5"], "p must exceed 1"),
        (["eig", "--domain", "{not json", "--p", "2"], "malformed JSON"),
        (["eig", "--domain", '{"type":"hexagon"}', "--p", "2"], "unknown domain type"),
        (["eig", "--domain", "@/no/such/file", "--p", "2"], "cannot read"),
        (["eig", "--domain", RECT, "--p", "2", "--method", "radial"], "needs a ball"),
        (["eig", "--domain", RECT, "--p", "2", "--resolution", "0"], "resolution"),
        (["cap", "--p", "2"], "--analytic"),
        (["cap", "--inner", "ball(1)", "--outer", "ball(0.5)", "--p", "2", "--resolution", "32"], "inside the outer"),
        (["sweep", "--domain", DISK, "--p-from", "2", "--p-to", "3", "--steps", "0"], "--steps"),
        (["verify", "--catalog", "default", "--jobs", "0"], "--jobs"),
        (["verify", "--catalog", "default", "--set-tol", "nonsense=1"], "unknown tolerance"),
        (["verify", "--catalog", "/no/such/catalog.json"], "cannot read catalog"),
    ],
)
def test_invalid_input_exits_2(capsys, argv, msg):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert msg in err


def test_usage_errors_exit_2(capsys):
    assert run(capsys, "eig", "--p", "2")[0] == 2
    assert run(capsys, "verify", "--catalog", "default", "--set-tol", "faber_krahn")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "--help")[0] == 0


def test_nonconvergence_exits_3(capsys, monkeypatch):
    monkeypatch.setattr(cli, "SolverOptions", partial(SolverOptions, max_iterations=1))
    code, out, err = run(capsys, "eig", "--domain", DISK, "--p", "3", "--resolution", "16")
    assert code == 3
    assert "converged  False" in out
    assert "did not converge" in err


def test_cap_analytic_ball(capsys):
    code, out, _ = run(capsys, "cap", "--analytic", "--n", "3", "--p", "2", "--r", "1")
    assert code == 0
    assert value(out, "capacity") == pytest.approx(4 * math.pi, rel=1e-14)


def test_cap_concentric_disks_with_gap(capsys):
    code, out, _ = run(capsys, "cap", "--inner", "ball(0.5)", "--outer", "ball(1)", "--p", "2",
                       "--resolution", "64", "--analytic")
    assert code == 0
    exact = 2 * math.pi / math.log(2)
    assert value(out, "analytic") == pytest.approx(exact)
    assert value(out, "capacity") == pytest.approx(exact, rel=0.01)
    assert abs(value(out, "rel. gap")) < 0.01


def test_cheeger_square(capsys):
    code, out, _ = run(capsys, "cheeger", "--domain", RECT)
    assert code == 0
    assert value(out, "cheeger") == pytest.approx(3.77245, abs=1e-5)


def test_sweep_disk_decreases_toward_cheeger(capsys):
    code, out, _ = run(capsys, "sweep", "--domain", DISK, "--p-from", "2", "--p-to", "1.25", "--steps", "3",
                       "--resolution", "24")
    assert code == 0
    rows = [line.split() for line in out.splitlines()[1:]]
    ps = [float(r[0]) for r in rows]
    vals = [float(r[1]) for r in rows]
    assert ps == pytest.approx([2.0, 1.75, 1.5, 1.25])
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] > 2.0


def test_sweep_eig_root_geometric(capsys):
    code, out, _ = run(capsys, "sweep", "--domain", "ball(3,1)", "--p-from", "2", "--p-to", "8", "--steps", "2",
                       "--spacing", "geometric", "--quantity", "eig-root")
    assert code == 0
    rows = [line.split() for line in out.splitlines()[1:]]
    assert [float(r[0]) for r in rows] == pytest.approx([2.0, 4.0, 8.0])
    assert float(rows[0][1]) == pytest.approx(math.pi, rel=1e-8)


def test_verify_csv_report(capsys, catalog, tmp_path):
    out_dir = tmp_path / "report"
    code, out, _ = run(capsys, "verify", "--catalog", str(catalog), "--format", "csv", "--out", str(out_dir))
    assert code == 0, out
    text = (out_dir / "report.csv").read_text()
    assert text.splitlines()[0] == CSV_HEADER
    assert "0 failed" in out


def test_verify_stdout_json(capsys, catalog):
    code, out, _ = run(capsys, "verify", "--catalog", str(catalog), "--format", "json", "--p-list", "2.5")
    assert code == 0
    doc = json.loads(out)
    assert doc["config"]["resolution"] == 24
    assert doc["config"]["p_list"] == [2.5]
    assert doc["summary"]["failed"] == 0


def test_verify_corrupted_tolerance_exits_1(capsys, catalog):
    code, _, err = run(capsys, "verify", "--catalog", str(catalog), "--set-tol", "faber_krahn=-0.5")
    assert code == 1
    assert "FAILED: faber_krahn" in err


def test_verify_is_deterministic_across_jobs(capsys, catalog, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(capsys, "verify", "--catalog", str(catalog), "--format", "json", "--out", str(a))[0] == 0
    assert run(capsys, "verify", "--catalog", str(catalog), "--format", "json", "--out", str(b), "--jobs", "2")[0] == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_resolution_environment_variable(capsys, catalog, monkeypatch, tmp_path):
    doc = json.loads(catalog.read_text())
    del doc["resolution"]
    path = tmp_path / "noresolution.json"
    path.write_text(json.dumps(doc))
    monkeypatch.setenv("PFK_DEFAULT_RESOLUTION", "20")
    code, out, _ = run(capsys, "verify", "--catalog", str(path), "--format", "json", "--p-list")
    assert code == 0
    assert json.loads(out)["config"]["resolution"] == 20


@pytest.mark.parametrize(
    "doc,msg",
    [
        ({"domains": []}, "nonempty"),
        ({"domains": [{"name": "a", "domain": {"type": "ball", "r": 1}},
                      {"name": "a", "domain": {"type": "ball", "r": 2}}]}, "duplicate"),
        ({"domains": [{"name": "a"}]}, "needs a 'domain'"),
        ({"domains": [{"domain": {"type": "ball", "r": -1}}]}, "radius"),
        ({"domains": [{"domain": {"type": "ball", "r": 1}}], "p_list": [0.5]}, "exceed 1"),
    ],
)
def test_bad_catalogs_exit_2(capsys, tmp_path, doc, msg):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "verify", "--catalog", str(path))
    assert code == 2
    assert msg in err
