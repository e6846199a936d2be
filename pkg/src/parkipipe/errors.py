"""Exception hierarchy shared by all pipeline stages.

Every domain error derives from :class:`PipelineError`; the CLI maps these to
exit code 1 and writes ``error.json``.
"""


class PipelineError(Exception):
    """Base class for domain errors."""

    code = "pipeline_error"


class InvalidRecord(PipelineError, ValueError):
    code = "invalid_record"


class InvalidParams(PipelineError, ValueError):
    code = "invalid_params"


class SignalTooShort(PipelineError, ValueError):
    code = "signal_too_short"


class ResolutionTooCoarse(PipelineError, ValueError):
    code = "resolution_too_coarse"


class NoVoicedFrames(PipelineError):
    code = "no_voiced_frames"


class TooFewPeriods(PipelineError, ValueError):
    code = "too_few_periods"


class MissingMovementRecord(PipelineError):
    code = "missing_movement_record"


class MissingModality(PipelineError):
    code = "missing_modality"


class SingleClass(PipelineError, ValueError):
    code = "single_class"


class FeatureMismatch(PipelineError, ValueError):
    code = "feature_mismatch"


class InsufficientCompleteSamples(PipelineError):
    code = "insufficient_complete_samples"


class SingleClassTruth(PipelineError, ValueError):
    code = "single_class_truth"


class TooFewSamplesPerClass(PipelineError):
    code = "too_few_samples_per_class"


class DegenerateInput(PipelineError, ValueError):
    code = "degenerate_input"


class NonPdSubject(PipelineError):
    code = "non_pd_subject"


class InvalidSpec(PipelineError, ValueError):
    code = "invalid_spec"


class UnknownSubject(PipelineError, KeyError):
    code = "unknown_subject"

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class SchemaError(PipelineError):
    code = "schema_error"
