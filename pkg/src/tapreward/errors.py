"""Error types shared across the pipeline.

Every failure mode gets its own class so callers can branch on type
rather than parsing messages. All inherit from TapRewardError.
"""


class TapRewardError(Exception):
    """Base class for all errors raised by this package."""


class SchemaViolation(TapRewardError):
    """A document or value fails structural validation."""


class MalformedDocument(SchemaViolation):
    """Input bytes are not parseable as a document at all."""


class EmptyTrace(TapRewardError):
    """A trace with zero entries reached a stage that needs at least one."""


class InvalidSpec(TapRewardError):
    """CorpusSpec fields are internally inconsistent."""


class NonFiniteParameter(TapRewardError):
    """A requested engine parameter is NaN or infinite."""


class OutOfMetaEnvelope(TapRewardError):
    """A proposed tuning config exceeds the governing meta-envelope.

    Carries the list of violations as (parameter, side, excess) tuples.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        parts = [
            f"{param}.{side} exceeds meta bound by {excess:.6f}"
            for param, side, excess in self.violations
        ]
        super().__init__("; ".join(parts))


class ClippingDetected(TapRewardError):
    """Rendered audio exceeded full scale before quantization."""


class TooShort(TapRewardError):
    """Signal is shorter than the analysis window of the requested metric."""


class AllBelowGate(TapRewardError):
    """Every analysis block fell below the gating threshold."""


class InsufficientLabels(TapRewardError):
    """Fewer than two pattern labels present; separation is undefined."""


class InconsistentInputs(TapRewardError):
    """Report fields contradict each other at build time."""


class MalformedReport(SchemaViolation):
    """Report bytes do not decode into a structurally valid report."""


class VersionMismatch(TapRewardError):
    """Report was produced under an unsupported report_version."""


class UnresolvableReference(TapRewardError):
    """A report references a trace or config that cannot be found or
    whose digest no longer matches."""
