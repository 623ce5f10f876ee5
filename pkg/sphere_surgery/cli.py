#!/usr/bin/env python
#
# Command line front end for the sphere_surgery package.
#
# Every mode writes a JSON report to stdout (or to the -o file); logging and
# error diagnostics go to stderr. Precondition errors exit with 2, failed
# surgeries with 3.

import argparse
import json
import logging
import sys

from sphere_surgery import arguments
from sphere_surgery import commands
from sphere_surgery import errors
from sphere_surgery import fieldio
from sphere_surgery.config import RunConfig

logger = logging.getLogger(__name__)

USAGE_EXIT = 2


def _diagnostic(error, message, details=None):
    return json.dumps({
        "schema": fieldio.SCHEMA,
        "error": error,
        "message": message,
        "details": details or {},
    }, sort_keys=True, default=fieldio.jsonable)


def _report_error(e):
    data = e.to_dict()
    if isinstance(e, errors.SurgeryFailed) and e.report is not None:
        data["details"]["report"] = e.report.to_dict()
    sys.stderr.write(_diagnostic(data["error"], data["message"], data["details"]) + "\n")
    return e.exit_code


def configure_logging(verbosity):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity and verbosity > 1:
        level = logging.DEBUG
    logging.basicConfig(stream=sys.stderr, level=level,
        format="%(levelname)s %(name)s: %(message)s")


class ArgumentParser(argparse.ArgumentParser):
    """argparse with usage errors reported as JSON on stderr."""

    def error(self, message):
        sys.stderr.write(_diagnostic("UsageError", message,
            {"usage": self.format_usage().strip()}) + "\n")
        sys.exit(USAGE_EXIT)


# implemented as a mixin class so that we can keep the logic implementing the
# actual analysis separate from the logic of the command line processing
class CLIMixin(object):

    # this is a wrapper that implements the command line processing logic, and
    # is used as the target function in the argument parser defaults
    def process_command_line(self, args):
        try:
            self.process(args)
            fieldio.write_json(self.report(), self.config.output)
        except errors.SphereSurgeryError as e:
            return _report_error(e)
        except IOError as e:
            sys.stderr.write(_diagnostic("IOError", str(e)) + "\n")
            return USAGE_EXIT
        return 0

    # Override the argument parser to point it at the process_command_line
    # method
    def add_arguments(self, subparser):
        parser = super(CLIMixin, self).add_arguments(subparser)
        parser.set_defaults(func=self.process_command_line)
        return parser


class JacobianCLI(CLIMixin, commands.Jacobian):
    pass


class DegreeCLI(CLIMixin, commands.Degree):
    pass


class ChargesCLI(CLIMixin, commands.Charges):
    pass


class ConnectionCLI(CLIMixin, commands.ConnectionCommand):
    pass


class SurgeryCLI(CLIMixin, commands.Surgery):
    pass


class ApproximateCLI(CLIMixin, commands.Approximate):
    pass


class VerifyCLI(CLIMixin, commands.Verify):
    pass


class ExportCLI(CLIMixin, commands.Export):
    pass


MODES = [
    JacobianCLI,
    DegreeCLI,
    ChargesCLI,
    ConnectionCLI,
    SurgeryCLI,
    ApproximateCLI,
    VerifyCLI,
    ExportCLI,
]


def make_parser():
    parser = ArgumentParser(prog='ssurg', argument_default=argparse.SUPPRESS)
    arguments.set_common_defaults(parser)
    subparsers = parser.add_subparsers(title="Modes of operation",
        description="<mode> -h/--help for mode help",
        dest='mode', parser_class=ArgumentParser)
    subparsers.required = True

    # the command objects stay reachable through the parser defaults
    # (the process_command_line bound methods)
    for mode in MODES:
        mode().add_arguments(subparsers)
    return parser


def parse_args(argv=None):
    return make_parser().parse_args(argv)


def write_config(args):
    try:
        c = RunConfig(args)
        c.to_config(args.write_config)
    except errors.SphereSurgeryError as e:
        return _report_error(e)
    except IOError as e:
        sys.stderr.write(_diagnostic("IOError", str(e)) + "\n")
        return USAGE_EXIT
    if args.write_config != '-':
        logger.info("Config written to %s", args.write_config)
    return 0


def main(argv=None):
    args = parse_args(argv)
    configure_logging(args.verbose)

    if args.write_config:
        return write_config(args)

    return args.func(args)


def cli(argv):
    """Run one command line and return its exit code."""
    try:
        return main(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else USAGE_EXIT


if __name__ == '__main__':
    sys.exit(main())
