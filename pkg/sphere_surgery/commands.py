import json
import logging

import numpy as np

from sphere_surgery import arguments
from sphere_surgery import config
from sphere_surgery import errors
from sphere_surgery import fieldio
from sphere_surgery import pipeline
from sphere_surgery import surgery
from sphere_surgery.connection import BRUTE_FORCE_LIMIT
from sphere_surgery.connection import Connection
from sphere_surgery.connection import brute_force_connection
from sphere_surgery.connection import dual_family
from sphere_surgery.connection import dual_lower_bound
from sphere_surgery.connection import l_of_map
from sphere_surgery.connection import minimal_connection
from sphere_surgery.field import gradient
from sphere_surgery.field import lp_norm
from sphere_surgery.jacobian import ChargeSet
from sphere_surgery.jacobian import d_field
from sphere_surgery.jacobian import detect_charges
from sphere_surgery.jacobian import pairings
from sphere_surgery.jacobian import sphere_degree
from sphere_surgery.presets import make_map
from sphere_surgery.testfunction import Bump

logger = logging.getLogger(__name__)


def _point(x):
    return [float(c) for c in x]


# Each subcommand is an object that sets up its own argument parsing (adding
# a subparser to the top level parser), builds a RunConfig from the parsed
# arguments, runs the analysis and formats the result as a JSON-ready dict.
# The actual call to parse_args() and the error handling happen elsewhere.
class Command(object):

    name = None
    # approximate and verify need a resolution the cover can work with
    pipeline = False

    def __init__(self):
        self.field = None
        self.cell_mask = None

    def format_header(self):
        return {
            "command": self.name,
            "config": self.config.to_dict(),
        }

    def format_output(self):
        raise NotImplementedError

    def add_arguments(self, subparser):
        raise NotImplementedError

    # this doesn't catch any errors - that's up to higher levels
    def create_config(self, args):
        self.args = args
        self.config = config.RunConfig(args, pipeline=self.pipeline)
        return self.config

    def load_map(self):
        c = self.config
        if c.field:
            self.u = fieldio.import_csv(c.field, c.domain)
        else:
            self.u = make_map(c.domain, c.resolution, c.preset, **c.preset_params())
        return self.u

    def resolve_lambda(self):
        lam = self.config.lam
        if lam == 'auto':
            u = self.u
            lam = surgery.calibrate_lambda(u.dimension, self.config.p,
                u.lattice.resolution)
        return float(lam)

    def export_file(self):
        filename = getattr(self.args, 'export_file', None)
        if filename:
            return filename
        return "field.%s" % (self.config.export)

    def write_field(self):
        if self.config.export == 'none' or self.field is None:
            return
        fieldio.export_field(self.field, self.config.export, self.export_file(),
            self.cell_mask)

    def run_analysis(self):
        raise NotImplementedError

    def process(self, args):
        self.create_config(args)
        self.run_analysis()
        self.write_field()

    def report(self):
        out = self.format_header()
        out.update(self.format_output())
        return out


def _add_parser(subparser, name, description, help):
    return subparser.add_parser(name, description=description, help=help)


class Jacobian(Command):

    name = 'jacobian'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description="Pair the distributional Jacobian with test functions",
            help="Jacobian pairings against a family of test functions")
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_family_args(parser)
        arguments.add_analysis_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def build_family(self):
        u = self.u
        domain = u.domain
        if self.config.family == 'bump':
            return [Bump(domain.center, 0.5 * domain.inradius, ident='bump')]
        connection = l_of_map(u, self.config.cell_scale)
        return dual_family(domain, u.spacing, connection.charges, connection.matching)

    def run_analysis(self):
        u = self.load_map()
        self.family = self.build_family()
        dfield = d_field(u)
        self.values = pairings(u, self.family, self.config.workers, dfield)
        self.d_l1 = lp_norm(dfield, 1.0)
        self.field = u

    def format_output(self):
        rows = [{"id": z.ident, "kind": z.kind, "value": v,
                 "resolution": self.u.lattice.resolution}
                for (z, v) in zip(self.family, self.values)]
        return {
            "pairings": rows,
            "max_abs": max((abs(v) for v in self.values), default=0.0),
            "d_field_l1": self.d_l1,
        }


class Degree(Command):

    name = 'degree'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description="Degree of the map restricted to a sphere",
            help="Degree of the map on a sphere inside the domain")
        arguments.add_degree_args(parser)
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def run_analysis(self):
        u = self.load_map()
        center = self.args.sphere_center
        if center is None:
            center = u.domain.center
        self.center = np.asarray(center, dtype=float)
        self.radius = float(self.args.sphere_radius)
        self.degree, self.residual = sphere_degree(u, self.center, self.radius)

    def format_output(self):
        return {
            "center": _point(self.center),
            "radius": self.radius,
            "degree": self.degree,
            "residual": self.residual,
        }


class Charges(Command):

    name = 'charges'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description="Detect the topological charges of the map",
            help="Locate charges and their degrees")
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_analysis_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def run_analysis(self):
        u = self.load_map()
        self.charges = detect_charges(u, self.config.cell_scale)

    def format_output(self):
        return {
            "charges": self.charges.to_json(),
            "cell_scale": self.charges.cell_scale,
            "total_degree": self.charges.total_degree,
            "expanded_count": self.charges.expanded_count(),
        }


class ConnectionCommand(Command):

    name = 'connection'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description=(
                "Minimal connection of the charges, with the boundary "
                "absorbing any charge"
            ),
            help="Length of the minimal connection")
        arguments.add_connection_args(parser)
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_analysis_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def load_charges(self, filename):
        try:
            with open(filename) as fp:
                data = json.load(fp)
        except IOError as e:
            raise IOError("Unable to load charges file %s: %s" % (filename, e))
        except ValueError as e:
            raise errors.PreconditionError("Charges file is not valid JSON",
                filename=filename, reason=str(e))
        entries = data.get("charges", []) if isinstance(data, dict) else data
        domain = self.config.domain
        for entry in entries:
            if len(entry["x"]) != domain.dimension:
                raise errors.LatticeMismatch("Charge location has the wrong dimension",
                    filename=filename, x=entry["x"], dimension=domain.dimension)
        return ChargeSet.from_json(domain, data)

    def run_analysis(self):
        self.lower_bound = None
        filename = getattr(self.args, 'charges', None)
        if filename:
            charges = self.load_charges(filename)
            matching = minimal_connection(charges)
            self.connection = Connection(matching.length, charges, matching)
        else:
            u = self.load_map()
            self.connection = l_of_map(u, self.config.cell_scale)
            family = dual_family(u.domain, u.spacing, self.connection.charges,
                self.connection.matching)
            self.lower_bound = dual_lower_bound(u, family, self.config.workers)
        charges = self.connection.charges
        self.brute_force = None
        if charges.expanded_count() <= BRUTE_FORCE_LIMIT:
            self.brute_force = brute_force_connection(charges)

    def format_output(self):
        out = self.connection.to_json()
        out["brute_force"] = self.brute_force
        out["dual_lower_bound"] = self.lower_bound
        return out


class Surgery(Command):

    name = 'surgery'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description="Run one ball surgery and record its estimates",
            help="Single good, bad or boundary ball surgery")
        arguments.add_surgery_args(parser)
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_analysis_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def choose_kind(self, grad, center, r, lam):
        u = self.u
        if float(u.domain.boundary_distance(center)) <= u.spacing / 2.0:
            return surgery.BOUNDARY
        n = u.dimension
        energy = surgery.ball_energy(grad, center, 2.0 * r, self.config.p)
        if energy >= lam * r ** (n - self.config.p):
            return surgery.BAD
        return surgery.GOOD

    def run_analysis(self):
        u = self.load_map()
        c = self.config
        p = c.p
        center = np.asarray(self.args.ball_center, dtype=float)
        if len(center) != u.dimension:
            raise errors.PreconditionError("Ball centre has the wrong dimension",
                center=_point(center), dimension=u.dimension)
        r = float(self.args.ball_radius)
        lam = self.resolve_lambda()
        connection = l_of_map(u, c.cell_scale)
        matching = connection.matching
        kind = self.args.kind
        chosen = kind
        if kind == 'auto':
            chosen = self.choose_kind(gradient(u), center, r, lam)
        logger.info("Running %s surgery at %s, r = %g", chosen, _point(center), r)
        common = dict(p=p, lam=lam, measure_l=True, cell_scale=c.cell_scale)
        if chosen == surgery.BAD:
            w, rep = surgery.replace_bad_ball(u, center, r, matching,
                max_iters=c.max_iters, check=(kind != 'auto'), **common)
        elif chosen == surgery.GOOD:
            try:
                w, rep = surgery.replace_good_ball(u, center, r, matching, **common)
            except errors.TraceNotInSmallDisk as e:
                if kind != 'auto':
                    raise
                logger.info("%s, using the bad construction", e.args[0])
                w, rep = surgery.replace_bad_ball(u, center, r, matching,
                    max_iters=c.max_iters, check=False, **common)
                rep.notes.append("fallback from the good construction")
        else:
            w, rep = surgery.replace_boundary_ball(u, center, r, matching,
                delta=c.delta, **common)
        self.kind = chosen
        self.lam = lam
        self.surgery = rep
        self.field = w
        self.cell_mask = rep.a_mask

    def format_output(self):
        return {
            "kind": self.kind,
            "lam": self.lam,
            "report": self.surgery.to_dict(),
        }


class Approximate(Command):

    name = 'approximate'
    pipeline = True

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description="Approximate the map by a charge-free map",
            help="Run the whole surgery pipeline")
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_analysis_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def run_analysis(self):
        u = self.load_map()
        self.w, self.approximation = pipeline.approximate(u, self.config.p, self.config)
        self.field = self.w
        self.cell_mask = self.approximation.a_mask

    def format_output(self):
        return self.approximation.to_dict()


class Verify(Approximate):

    name = 'verify'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description=(
                "Approximate the map, then recompute every recorded estimate "
                "from the stored snapshots"
            ),
            help="Run the pipeline and check its estimates")
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_analysis_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def run_analysis(self):
        super(Verify, self).run_analysis()
        self.verification = pipeline.verify_estimates(self.u, self.w,
            self.approximation, self.config.p)

    def format_output(self):
        return {
            "approximation": self.approximation.to_dict(),
            "verification": self.verification.to_dict(),
        }


class Export(Command):

    name = 'export'

    def add_arguments(self, subparser):
        parser = _add_parser(subparser, self.name,
            description="Write the sampled map as a VTK or CSV field file",
            help="Export the map to a field file")
        arguments.add_export_args(parser)
        arguments.add_domain_args(parser)
        arguments.add_map_args(parser)
        arguments.add_output_args(parser)
        arguments.add_common_args(parser)
        return parser

    def create_config(self, args):
        super(Export, self).create_config(args)
        self.config.export = args.format
        return self.config

    def run_analysis(self):
        self.field = self.load_map()

    def format_output(self):
        return {
            "format": self.config.export,
            "file": self.export_file(),
            "lattice": self.field.lattice.to_dict(),
        }
