import json

import numpy as np
import pytest

from sphere_surgery import fieldio
from sphere_surgery.cli import cli
from sphere_surgery.lattice import DomainSpec


def run(capsys, *argv):
    code = cli(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    data = json.loads(out)
    assert data["schema"] == 1
    assert data["command"] == argv[0]
    return data


def diagnostic(err):
    data = json.loads(err.strip().splitlines()[-1])
    assert data["schema"] == 1
    return data


def test_version(capsys):
    code, out, _ = run(capsys, '-V')
    assert code == 0
    assert "sphere_surgery version" in out


def test_usage_errors_are_json(capsys):
    code, _, err = run(capsys, 'nonsense')
    assert code == 2
    assert diagnostic(err)["error"] == "UsageError"
    code, _, err = run(capsys, 'degree', '--n', '3')
    assert code == 2
    assert "sphere-radius" in diagnostic(err)["message"]


def test_constant_map_has_zero_pairings(capsys):
    data = report(capsys, 'jacobian', '--preset', 'constant', '--n', '2', '--res', '16')
    assert data["pairings"]
    assert data["max_abs"] <= 1e-12
    assert data["d_field_l1"] == 0.0
    assert all(row["resolution"] == 16 for row in data["pairings"])


def test_bump_family(capsys):
    data = report(capsys, 'jacobian', '--preset', 'hedgehog', '--domain', 'ball',
        '--n', '3', '--res', '16', '--family', 'bump')
    assert [row["id"] for row in data["pairings"]] == ["bump"]
    assert data["pairings"][0]["value"] > 0.0


def test_degree(capsys):
    data = report(capsys, 'degree', '--preset', 'hedgehog', '--domain', 'ball',
        '--n', '3', '--res', '16', '--sphere-radius', '0.5')
    assert data["degree"] == 1
    assert data["center"] == [0.0, 0.0, 0.0]


def test_charges_are_deterministic(capsys):
    argv = ('charges', '--preset', 'dipole', '--n', '3', '--res', '32')
    first = run(capsys, *argv)[:2]
    second = run(capsys, *argv)[:2]
    assert first == second
    data = json.loads(first[1])
    assert data["total_degree"] == 0
    assert sorted(c["d"] for c in data["charges"]) == [-1, 1]


def test_connection_from_a_charges_file(capsys, tmp_path):
    filename = tmp_path / "charges.json"
    filename.write_text(json.dumps([
        {"x": [0.3, 0.5, 0.5], "d": 1},
        {"x": [0.7, 0.5, 0.5], "d": -1},
    ]))
    data = report(capsys, 'connection', '--charges', str(filename))
    assert data["length"] == pytest.approx(0.4)
    assert data["brute_force"] == pytest.approx(data["length"])
    assert data["dual_lower_bound"] is None


def test_charges_file_of_the_wrong_dimension(capsys, tmp_path):
    filename = tmp_path / "charges.json"
    filename.write_text(json.dumps({"charges": [{"x": [0.3, 0.5], "d": 1}]}))
    code, _, err = run(capsys, 'connection', '--charges', str(filename), '--n', '3')
    assert code == 2
    assert diagnostic(err)["error"] == "LatticeMismatch"


def test_exponent_out_of_range(capsys):
    code, out, err = run(capsys, 'charges', '--n', '3', '--p', '3.5')
    assert code == 2
    assert out == ""
    data = diagnostic(err)
    assert data["error"] == "InvalidExponent"
    assert data["details"]["p"] == 3.5


def test_surgery_on_a_constant_map(capsys):
    data = report(capsys, 'surgery', '--preset', 'constant', '--n', '2', '--res', '32',
        '--ball-center', '0.5,0.5', '--ball-radius', '0.1', '--lam', '1')
    assert data["kind"] == 'good'
    assert data["report"]["checks"]["locality"]


def test_failed_surgery_exits_with_three(capsys):
    code, _, err = run(capsys, 'surgery', '--preset', 'equator-wrap', '--turns', '2',
        '--n', '2', '--res', '64', '--ball-center', '0.5,0.5', '--ball-radius', '0.2',
        '--lam', '1e6', '--kind', 'good')
    assert code == 3
    assert diagnostic(err)["error"] == "TraceNotInSmallDisk"


def test_approximate_and_verify(capsys):
    argv = ('--preset', 'hedgehog', '--domain', 'ball', '--n', '3', '--res', '16',
        '--lam', '1')
    data = report(capsys, 'approximate', *argv)
    assert data["success"]
    assert data["residual_charges"] == 0
    assert data["case"] == 2
    data = report(capsys, 'verify', *argv)
    assert data["approximation"]["success"]
    assert data["verification"]["all_hold"]


def test_pipeline_needs_a_finer_lattice(capsys):
    code, _, err = run(capsys, 'approximate', '--n', '2', '--res', '8')
    assert code == 2
    assert diagnostic(err)["error"] == "InvalidResolution"


def test_export_and_reuse_a_field(capsys, tmp_path):
    filename = tmp_path / "hedgehog.csv"
    data = report(capsys, 'export', '--format', 'csv', '--export-file', str(filename),
        '--preset', 'hedgehog', '--n', '2', '--res', '16')
    assert data["format"] == 'csv'
    assert data["lattice"]["resolution"] == 16
    u = fieldio.import_csv(str(filename), DomainSpec(2, 'box'))
    assert np.allclose(np.linalg.norm(u.values, axis=-1), 1.0)
    data = report(capsys, 'charges', '--field', str(filename), '--n', '2')
    assert data["total_degree"] == 1


def test_report_to_a_file(capsys, tmp_path):
    filename = tmp_path / "report.json"
    code, out, _ = run(capsys, 'charges', '--preset', 'constant', '--n', '2',
        '--res', '16', '-o', str(filename))
    assert code == 0
    assert out == ""
    assert json.loads(filename.read_text())["charges"] == []


def test_write_config_and_run_from_it(capsys, tmp_path):
    filename = tmp_path / "run.ini"
    code, _, _ = run(capsys, 'charges', '--preset', 'dipole', '--n', '2', '--res', '64',
        '--write-config', str(filename))
    assert code == 0
    assert "[preset]" in filename.read_text()
    data = report(capsys, 'charges', '--config', str(filename))
    assert data["config"]["preset"] == 'dipole'
    assert data["config"]["dimension"] == 2
    code, out, _ = run(capsys, 'charges', '--write-config', '-')
    assert code == 0
    assert "[domain]" in out
