"""Reading and writing fields and reports.

Fields go out as legacy ASCII VTK (structured points) or as CSV with one
row per lattice node; CSV files can be read back onto a matching lattice.
Reports are JSON with sorted keys and a schema version.
"""

import json
import logging
import sys

import numpy as np

from sphere_surgery import errors
from sphere_surgery.field import GridMap
from sphere_surgery.field import normalize_rows
from sphere_surgery.lattice import BALL
from sphere_surgery.lattice import NODE_TOLERANCE

logger = logging.getLogger(__name__)

SCHEMA = 1

FORMATS = ('none', 'vtk', 'csv')

AXES = 'xyz'


def jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if hasattr(value, 'to_json'):
        return value.to_json()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError("%s is not JSON serialisable" % type(value).__name__)


def dumps(data):
    data = dict(data)
    data["schema"] = SCHEMA
    return json.dumps(data, sort_keys=True, indent=2, default=jsonable)


def _write_text(text, filename):
    if filename in (None, '-'):
        sys.stdout.write(text)
        return
    with open(filename, "w") as outfile:
        outfile.write(text)


def write_json(data, filename='-'):
    _write_text(dumps(data) + "\n", filename)


def _vtk_order(values, n):
    # VTK wants x varying fastest
    axes = tuple(reversed(range(n)))
    if values.ndim > n:
        axes += tuple(range(n, values.ndim))
    return np.transpose(values, axes)


def _pad3(vectors):
    if vectors.shape[-1] == 3:
        return vectors
    pad = np.zeros(vectors.shape[:-1] + (3 - vectors.shape[-1],))
    return np.concatenate([vectors, pad], axis=-1)


def vtk_text(u, cell_mask=None, title="sphere_surgery field"):
    lattice = u.lattice
    n = lattice.dimension
    dims = list(lattice.shape) + [1] * (3 - n)
    origin = list(lattice.origin) + [0.0] * (3 - n)
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        "DIMENSIONS %d %d %d" % tuple(dims),
        "ORIGIN %r %r %r" % tuple(origin),
        "SPACING %r %r %r" % ((lattice.spacing,) * 3),
        "POINT_DATA %d" % int(np.prod(lattice.shape)),
        "VECTORS u double",
    ]
    vectors = _pad3(_vtk_order(np.asarray(u.values), n)).reshape(-1, 3)
    lines.extend("%.17g %.17g %.17g" % tuple(row) for row in vectors)
    lines.append("SCALARS active int 1")
    lines.append("LOOKUP_TABLE default")
    active = _vtk_order(lattice.node_active, n).reshape(-1)
    lines.extend("%d" % a for a in active)
    if cell_mask is not None:
        lines.append("CELL_DATA %d" % int(np.prod(lattice.cell_shape)))
        lines.append("SCALARS a_mask int 1")
        lines.append("LOOKUP_TABLE default")
        mask = _vtk_order(np.asarray(cell_mask, dtype=bool), n).reshape(-1)
        lines.extend("%d" % m for m in mask)
    return "\n".join(lines) + "\n"


def export_vtk(u, filename, cell_mask=None):
    logger.info("Writing VTK field to %s", filename)
    _write_text(vtk_text(u, cell_mask), filename)


def csv_header(n):
    return ",".join([AXES[i] for i in range(n)] + ["u" + AXES[i] for i in range(n)])


def csv_text(u):
    n = u.dimension
    nodes = u.lattice.nodes.reshape(-1, n)
    values = np.asarray(u.values).reshape(-1, n)
    rows = np.concatenate([nodes, values], axis=1)
    lines = [csv_header(n)]
    lines.extend(",".join("%.17g" % c for c in row) for row in rows)
    return "\n".join(lines) + "\n"


def export_csv(u, filename):
    logger.info("Writing CSV field to %s", filename)
    _write_text(csv_text(u), filename)


def export_field(u, fmt, filename, cell_mask=None):
    if fmt == 'vtk':
        export_vtk(u, filename, cell_mask)
    elif fmt == 'csv':
        export_csv(u, filename)
    elif fmt != 'none':
        raise ValueError("Unknown export format %s" % fmt)


def import_csv(filename, domain):
    """Load a field written by export_csv onto the lattice of domain.

    The node count along each axis fixes the resolution; every row must sit
    on the lattice node in the same position. Values are renormalised.
    """
    try:
        data = np.loadtxt(filename, delimiter=',', skiprows=1, ndmin=2)
    except (OSError, IOError) as e:
        raise IOError("Unable to load field file %s: %s" % (filename, e))
    n = domain.dimension
    if data.shape[1] != 2 * n:
        raise errors.LatticeMismatch("Field file has the wrong number of columns",
            filename=filename, columns=data.shape[1], dimension=n)
    count = int(round(data.shape[0] ** (1.0 / n)))
    if count ** n != data.shape[0]:
        raise errors.LatticeMismatch("Field file is not a full lattice",
            filename=filename, rows=data.shape[0])
    resolution = count - 2 if domain.shape == BALL else count - 1
    lattice = domain.lattice(resolution)
    nodes = lattice.nodes.reshape(-1, n)
    offset = np.abs(data[:, :n] - nodes).max()
    if offset > NODE_TOLERANCE + 1e-6 * lattice.spacing:
        raise errors.LatticeMismatch("Field file rows do not match the lattice nodes",
            filename=filename, resolution=resolution, offset=float(offset))
    values = normalize_rows(data[:, n:]).reshape(tuple(lattice.shape) + (n,))
    logger.info("Loaded %s at resolution %d", filename, resolution)
    return GridMap(lattice, values)
