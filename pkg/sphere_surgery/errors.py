# Exceptions raised by the sphere_surgery modules.
#
# Everything derives from SphereSurgeryError so that the command line layer
# can catch one type and turn it into an exit code plus a JSON diagnostic.
# Precondition problems (bad input, refused operations) exit with 2, and
# failures inside the surgery constructions exit with 3.


class SphereSurgeryError(Exception):
    exit_code = 2

    def __init__(self, msg, **details):
        self.details = details
        text = msg
        if details:
            text += "\n"
            for key in sorted(details):
                text += "%s: %s\n" % (key, details[key])
        self.msg = text.rstrip("\n")
        super(SphereSurgeryError, self).__init__(msg)

    def __str__(self):
        return self.msg

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": self.args[0] if self.args else "",
            "details": self.details,
        }


class PreconditionError(SphereSurgeryError):
    exit_code = 2


class SurgeryFailure(SphereSurgeryError):
    exit_code = 3


# field_core
class UnknownPreset(PreconditionError):
    pass


class UnknownDomain(PreconditionError):
    pass


class SingularityOnNode(PreconditionError):
    pass


class LatticeMismatch(PreconditionError):
    pass


class InvalidExponent(PreconditionError):
    pass


class InvalidResolution(PreconditionError):
    pass


class NotUnitValued(PreconditionError):
    pass


class EpsilonBelowSpacing(PreconditionError):
    pass


class NearZeroVector(PreconditionError):
    pass


# jacobian
class NonIntegerDegree(PreconditionError):
    pass


class SupportTouchesBoundary(PreconditionError):
    pass


class SphereLeavesDomain(PreconditionError):
    pass


class CellScaleTooSmall(PreconditionError):
    pass


# connection
class TooManyCharges(PreconditionError):
    pass


class FamilyViolatesLipschitz(PreconditionError):
    pass


# surgery
class NoAdmissibleRadius(PreconditionError):
    pass


class RadiusBelowConnection(PreconditionError):
    pass


class BallLeavesDomain(PreconditionError):
    pass


class NotABadBall(PreconditionError):
    pass


class NotAGoodBall(PreconditionError):
    pass


class NonzeroDegree(PreconditionError):
    pass


class CurvedBoundaryUnsupported(PreconditionError):
    pass


class NotOnBoundary(PreconditionError):
    pass


class HomotopyNotFound(SurgeryFailure):
    pass


class TraceNotInSmallDisk(SurgeryFailure):
    pass


# pipeline
class RadiusTooLarge(PreconditionError):
    pass


class SurgeryFailed(SurgeryFailure):
    def __init__(self, ball, cause, report=None):
        self.ball = ball
        self.cause = cause
        self.report = report
        super(SurgeryFailed, self).__init__(
            "Surgery on ball %d failed" % (ball),
            ball=ball,
            cause="%s: %s" % (type(cause).__name__, cause.args[0] if cause.args else cause))


# configuration
class MissingSetting(PreconditionError):
    def __init__(self, attrs, msg):
        if isinstance(attrs, list):
            self.attrs = attrs
        else:
            self.attrs = [attrs]
        super(MissingSetting, self).__init__(msg, missing=", ".join(self.attrs))
