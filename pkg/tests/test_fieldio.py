import json

import numpy as np
import pytest

from sphere_surgery import errors
from sphere_surgery import fieldio
from sphere_surgery.lattice import DomainSpec
from sphere_surgery.presets import make_map


def test_dumps_sorts_keys_and_adds_the_schema():
    text = fieldio.dumps({"b": np.float64(1.5), "a": np.arange(3), "c": {2, 1}})
    assert json.loads(text) == {"a": [0, 1, 2], "b": 1.5, "c": [1, 2], "schema": 1}
    assert text.index('"a"') < text.index('"b"') < text.index('"schema"')
    with pytest.raises(TypeError):
        fieldio.dumps({"x": object()})


def test_write_json_to_a_file(tmp_path):
    filename = tmp_path / "report.json"
    fieldio.write_json({"value": 1}, str(filename))
    assert json.loads(filename.read_text()) == {"schema": 1, "value": 1}


def test_vtk_layout(box2):
    u = make_map(box2, 8, 'constant')
    mask = np.zeros(u.lattice.cell_shape, dtype=bool)
    mask[0, 0] = True
    lines = fieldio.vtk_text(u, mask).splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert "DATASET STRUCTURED_POINTS" in lines
    assert "DIMENSIONS 9 9 1" in lines
    assert "POINT_DATA 81" in lines
    start = lines.index("VECTORS u double") + 1
    vectors = np.array([[float(x) for x in line.split()] for line in lines[start:start + 81]])
    assert np.allclose(vectors, [0.0, 1.0, 0.0])
    assert "CELL_DATA 64" in lines
    assert lines[-64:].count("1") == 1


def test_vtk_runs_x_fastest(box3):
    u = make_map(box3, 8, 'equator-wrap')
    lines = fieldio.vtk_text(u).splitlines()
    start = lines.index("VECTORS u double") + 1
    second = np.array([float(x) for x in lines[start + 1].split()])
    assert np.allclose(second, u.values[1, 0, 0])


def test_csv_reads_back(tmp_path, ball3):
    u = make_map(ball3, 8, 'hedgehog')
    filename = tmp_path / "field.csv"
    fieldio.export_field(u, 'csv', str(filename))
    assert filename.read_text().splitlines()[0] == "x,y,z,ux,uy,uz"
    v = fieldio.import_csv(str(filename), ball3)
    assert v.lattice.resolution == 8
    assert np.allclose(v.values, u.values)


def test_csv_on_the_wrong_lattice(tmp_path, box2):
    u = make_map(box2, 8, 'hedgehog')
    filename = tmp_path / "field.csv"
    fieldio.export_csv(u, str(filename))
    with pytest.raises(errors.LatticeMismatch):
        fieldio.import_csv(str(filename), DomainSpec(2, 'ball'))
    with pytest.raises(errors.LatticeMismatch):
        fieldio.import_csv(str(filename), DomainSpec(3, 'box'))


def test_missing_field_file(tmp_path, box2):
    with pytest.raises(IOError, match="Unable to load field file"):
        fieldio.import_csv(str(tmp_path / "nothing.csv"), box2)


def test_unknown_export_format(box2):
    u = make_map(box2, 8, 'constant')
    with pytest.raises(ValueError):
        fieldio.export_field(u, 'png', 'field.png')
    fieldio.export_field(u, 'none', 'unused')
