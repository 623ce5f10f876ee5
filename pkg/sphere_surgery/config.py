import argparse
import logging
import sys
from configparser import ConfigParser as cfgparser

from sphere_surgery import errors
from sphere_surgery.lattice import DomainSpec
from sphere_surgery.presets import MIN_RESOLUTION

logger = logging.getLogger(__name__)

# resolution needed before the ball cover of the pipeline is meaningful
PIPELINE_RESOLUTION = 16


def str2point(v):
    return tuple(float(c) for c in v.split(','))


def point2str(v):
    return ",".join(repr(float(c)) for c in v)


def str2lam(v):
    if v == 'auto':
        return v
    return float(v)


def _optional_float(v):
    if v in ('', 'none', 'None'):
        return None
    return float(v)


class RunConfig(object):
    """Settings for one command line run.

    Values come from an ini file first (if --config is given), then from
    the command line flags, and finally verify() fills in the defaults for
    anything still missing and checks what we ended up with.
    """

    shape = None
    dimension = None
    resolution = None
    p = None
    lam = None
    delta = None
    radius = None
    cell_scale = None
    max_iters = None
    workers = None
    preset = None
    degree = None
    center = None
    plus = None
    minus = None
    xi = None
    seed = None
    turns = None
    amplitude = None
    output = None
    export = None
    family = None
    field = None
    filename = None

    # which ini section each setting is written to
    _sections = [
        ('domain', ['shape', 'dimension', 'resolution']),
        ('analysis', ['p', 'lam', 'delta', 'radius', 'cell_scale',
                      'max_iters', 'workers']),
        ('preset', ['preset', 'degree', 'center', 'plus', 'minus', 'xi',
                    'seed', 'turns', 'amplitude', 'field']),
        ('output', ['output', 'export', 'family']),
    ]

    # nothing is strictly required at the moment: every setting either has a
    # default or is derived from the others
    _required = []
    _defaults = {
        'shape': 'box',
        'dimension': 3,
        'resolution': 32,
        'lam': 'auto',
        'max_iters': 6,
        'workers': 1,
        'preset': 'hedgehog',
        'degree': 1,
        'seed': 0,
        'turns': 0.5,
        'amplitude': 0.3,
        'output': '-',
        'export': 'none',
        'family': 'default',
    }

    _wrapper_in = {
        'dimension': int,
        'resolution': int,
        'p': float,
        'lam': str2lam,
        'delta': _optional_float,
        'radius': _optional_float,
        'cell_scale': _optional_float,
        'max_iters': int,
        'workers': int,
        'degree': int,
        'center': str2point,
        'plus': str2point,
        'minus': str2point,
        'xi': str2point,
        'seed': int,
        'turns': float,
        'amplitude': float,
    }

    _wrapper_out = {
        'center': point2str,
        'plus': point2str,
        'minus': point2str,
        'xi': point2str,
    }

    @classmethod
    def attributes(cls):
        return [attr for (_, attrs) in cls._sections for attr in attrs]

    @classmethod
    def make_args(cls, **overrides):
        args = argparse.Namespace(config=None)
        for attr in cls.attributes():
            setattr(args, attr, None)
        for (attr, value) in overrides.items():
            setattr(args, attr, value)
        return args

    @classmethod
    def from_file(cls, filename, pipeline=False):
        c = cls()
        args = argparse.Namespace(config=filename)
        c.load_config(args)
        c.verify(pipeline)
        return c

    def __init__(self, args=None, pipeline=False):
        # with no args the caller does the configuration themselves
        if args is None:
            return
        self.load_config(args)
        for attr in self.attributes():
            value = getattr(args, attr, None)
            if value is not None:
                setattr(self, attr, value)
        self.verify(pipeline)

    def load_config(self, args):
        filename = getattr(args, 'config', None)
        if not filename:
            return
        cfg = cfgparser()
        try:
            with open(filename) as fp:
                cfg.read_file(fp, filename)
        except IOError as e:
            # Update the error message so that it's a bit more meaningful
            raise IOError("Unable to load config file %s: %s" % (filename, e))

        known = set(self.attributes())
        for section in cfg.sections():
            for (attr, value) in cfg.items(section):
                if attr not in known:
                    logger.warning("Ignoring unknown setting %s in [%s] of %s",
                        attr, section, filename)
                    continue
                w = self._wrapper_in.get(attr)
                if w is not None:
                    try:
                        value = w(value)
                    except ValueError:
                        raise errors.PreconditionError("Bad value in config file",
                            filename=filename, setting=attr, value=value)
                setattr(self, attr, value)
        self.filename = filename

    def verify(self, pipeline=False):
        # check for required values
        missing = [attr for attr in self._required if getattr(self, attr) is None]
        if missing:
            raise errors.MissingSetting(missing, "Run not fully configured")

        # fix missing defaults
        for (attr, default) in self._defaults.items():
            if getattr(self, attr) is None:
                setattr(self, attr, default)

        self.dimension = int(self.dimension)
        domain = self.domain
        n = domain.dimension
        if self.p is None:
            self.p = n - 0.5
        self.p = float(self.p)
        if not n - 1 < self.p < n:
            raise errors.InvalidExponent("The exponent must lie strictly between N-1 and N",
                p=self.p, dimension=n)
        minimum = PIPELINE_RESOLUTION if pipeline else MIN_RESOLUTION
        if int(self.resolution) < minimum:
            raise errors.InvalidResolution("Resolution too small for this command",
                resolution=self.resolution, minimum=minimum)
        self.resolution = int(self.resolution)
        if self.lam != 'auto':
            self.lam = float(self.lam)
            if self.lam <= 0.0:
                raise errors.PreconditionError("lam must be positive or auto",
                    lam=self.lam)
        if self.workers < 1:
            raise errors.PreconditionError("At least one worker is needed",
                workers=self.workers)
        for attr in ('center', 'plus', 'minus', 'xi'):
            point = getattr(self, attr)
            if point is not None and len(point) != n:
                raise errors.PreconditionError("Point has the wrong dimension",
                    setting=attr, point=point2str(point), dimension=n)

    @property
    def domain(self):
        return DomainSpec(int(self.dimension), self.shape)

    def preset_params(self):
        params = {}
        for attr in ('degree', 'center', 'plus', 'minus', 'xi', 'seed',
                     'turns', 'amplitude'):
            value = getattr(self, attr)
            if value is not None:
                params[attr] = value
        return params

    def to_dict(self):
        out = {}
        for attr in self.attributes():
            value = getattr(self, attr)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = list(value)
            out[attr] = value
        return out

    # write out an ini-formatted config file for this run
    # If filename is '-', write to stdout
    def to_config(self, filename='-'):
        cfg = cfgparser()
        for (section, attrs) in self._sections:
            cfg.add_section(section)
            for attr in attrs:
                value = getattr(self, attr)
                if value is None:
                    continue
                w = self._wrapper_out.get(attr, str)
                cfg.set(section, attr, w(value))

        if filename != '-':
            with open(filename, "w") as outfile:
                cfg.write(outfile)
            return
        cfg.write(sys.stdout)