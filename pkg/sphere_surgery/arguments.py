from sphere_surgery import version
from sphere_surgery.config import RunConfig
from sphere_surgery.config import str2lam
from sphere_surgery.config import str2point
from sphere_surgery.fieldio import FORMATS
from sphere_surgery.lattice import SHAPES
from sphere_surgery.presets import preset_names


# common argument handling
def add_domain_args(parser):
    g = parser.add_argument_group('domain')
    g.add_argument('--domain',
        action='store',
        dest='shape',
        choices=SHAPES,
        help='Reference domain: unit box or unit ball (default box)')
    g.add_argument('--n',
        action='store',
        dest='dimension',
        type=int,
        choices=[2, 3],
        help='Space dimension N (default 3)')
    g.add_argument('--res',
        action='store',
        dest='resolution',
        type=int,
        help='Cells along the side of the domain (default 32)')


def add_map_args(parser):
    g = parser.add_argument_group('map')
    g.add_argument('--preset',
        action='store',
        choices=preset_names(),
        help='Map to sample on the lattice (default hedgehog)')
    g.add_argument('--field',
        action='store',
        metavar='FILE.csv',
        help='Load the map from a CSV field file instead of a preset')
    g.add_argument('--degree',
        action='store',
        type=int,
        help='Degree of hedgehog and dipole charges (default 1)')
    g.add_argument('--center',
        action='store',
        type=str2point,
        metavar='X,Y[,Z]',
        help='Hedgehog or bump centre')
    g.add_argument('--plus',
        action='store',
        type=str2point,
        metavar='X,Y[,Z]',
        help='Positive charge of the dipole preset')
    g.add_argument('--minus',
        action='store',
        type=str2point,
        metavar='X,Y[,Z]',
        help='Negative charge of the dipole preset')
    g.add_argument('--xi',
        action='store',
        type=str2point,
        metavar='X,Y[,Z]',
        help='Value of the constant and bump presets')
    g.add_argument('--seed',
        action='store',
        type=int,
        help='Seed of the smooth-random preset (default 0)')
    g.add_argument('--turns',
        action='store',
        type=float,
        help='Winding of the equator-wrap preset (default 0.5)')
    g.add_argument('--amplitude',
        action='store',
        type=float,
        help='Amplitude of the smooth presets (default 0.3)')


def add_analysis_args(parser):
    g = parser.add_argument_group('analysis')
    g.add_argument('--p',
        action='store',
        type=float,
        help='Sobolev exponent, N-1 < p < N (default N - 1/2)')
    g.add_argument('--lam',
        action='store',
        type=str2lam,
        help='Good/bad ball energy threshold, a number or auto (default auto)')
    g.add_argument('--delta',
        action='store',
        type=float,
        help='Radius ceiling of the ball cover (default inradius/4)')
    g.add_argument('--radius',
        action='store',
        type=float,
        help='Override the radius of the ball cover')
    g.add_argument('--cell-scale',
        action='store',
        type=float,
        help='Size of the charge detection cubes (default 4h)')
    g.add_argument('--max-iters',
        action='store',
        type=int,
        help='Smoothing attempts allowed per bad ball (default 6)')
    g.add_argument('--workers',
        action='store',
        type=int,
        help='Worker threads for pairings (default 1)')


def add_output_args(parser):
    g = parser.add_argument_group('output')
    g.add_argument('-o', '--output',
        action='store',
        metavar='FILE',
        help='Write the JSON report to FILE instead of stdout')
    g.add_argument('--export',
        action='store',
        choices=FORMATS,
        help='Also write the resulting field (default none)')
    g.add_argument('--export-file',
        action='store',
        metavar='FILE',
        help='Field file name (default field.vtk or field.csv)')


def add_family_args(parser):
    g = parser.add_argument_group('test functions')
    g.add_argument('--family',
        action='store',
        choices=['default', 'bump'],
        help=(
            'default: distance ramps, charge cones, tents and a grid of cones;'
            ' bump: a single bump at the domain centre (default default)'
        ))


def add_degree_args(parser):
    g = parser.add_argument_group('sphere')
    g.add_argument('--sphere-center',
        action='store',
        type=str2point,
        metavar='X,Y[,Z]',
        help='Centre of the sphere (default the domain centre)')
    g.add_argument('--sphere-radius',
        action='store',
        type=float,
        required=True,
        help='Radius of the sphere')


def add_connection_args(parser):
    g = parser.add_argument_group('charges')
    g.add_argument('--charges',
        action='store',
        metavar='FILE.json',
        help='Read charges from a JSON file instead of detecting them')


def add_surgery_args(parser):
    g = parser.add_argument_group('ball')
    g.add_argument('--ball-center',
        action='store',
        type=str2point,
        required=True,
        metavar='X,Y[,Z]',
        help='Centre of the ball to operate on')
    g.add_argument('--ball-radius',
        action='store',
        type=float,
        required=True,
        help='Radius r; the surgery works inside the ball of radius 2r')
    g.add_argument('--kind',
        action='store',
        choices=['auto', 'good', 'bad', 'boundary'],
        default='auto',
        help='Which surgery to run (default: chosen from the ball energy)')


def add_export_args(parser):
    g = parser.add_argument_group('export')
    g.add_argument('--format',
        action='store',
        choices=['vtk', 'csv'],
        required=True,
        help='Field file format')


def add_common_args(parser):
    g = parser.add_argument_group('common options')
    g.add_argument('--config',
        action='store',
        help='Config file')
    g.add_argument('--write-config',
        action='store',
        metavar='CONFIG',
        help='Write config from the command line to a file (- for stdout)')
    g.add_argument('-v', '--verbose',
        action='count',
        help='More logging on stderr, repeat for debug output')


def set_common_defaults(parser):
    # some global defaults . . .
    defaults = dict((attr, None) for attr in RunConfig.attributes())
    defaults.update(
        config=None,
        write_config=None,
        verbose=0,
        export_file=None,
    )
    parser.set_defaults(**defaults)
    parser.add_argument('-V', '--version',
        action='version',
        version="sphere_surgery version %s" % (version.__version__),
        help='Print program version information')
