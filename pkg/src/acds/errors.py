"""Exception hierarchy shared across the package."""


class AcdsError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(AcdsError):
    """Input does not match the expected column/field schema."""


class DomainError(AcdsError):
    """A field value is outside its legal domain."""


class IntegrityError(AcdsError):
    """Structural inconsistency, e.g. duplicate patient ids."""


class InsufficientDataError(AcdsError):
    """Too few values to compute the requested statistic."""


class PreconditionError(AcdsError):
    """An operation precondition does not hold for the given input."""


class DiscretizationError(AcdsError):
    """A feature cannot be discretized (e.g. constant values)."""


class GeneratorSpecError(AcdsError):
    """Synthetic-cohort generator spec is malformed or infeasible."""


class ModelSpecError(AcdsError):
    """Model spec is invalid or incompatible with the binning mode."""


class TrainingError(AcdsError):
    """Training cannot proceed (e.g. single-class training set)."""


class PredictionError(AcdsError):
    """A record cannot be scored by a trained model."""


class BundleError(AcdsError):
    """Model bundle is corrupt or truncated."""


class BundleVersionError(BundleError):
    """Model bundle uses an unsupported format version."""


class UndefinedMetricError(AcdsError):
    """Metric is undefined for the given inputs (e.g. single-class labels)."""


class FoldPlanError(AcdsError):
    """Cross-validation plan cannot be constructed."""


class SelectionError(AcdsError):
    """Ensemble selection cannot proceed (e.g. empty library)."""


class VoteError(AcdsError):
    """Voting committee could not produce a decision."""


class CatalogError(AcdsError):
    """Service-package catalog is invalid or inconsistent with the model."""


class RequestError(AcdsError):
    """A recommendation request is missing or misusing fields."""


class RegistryError(AcdsError):
    """Model registry operation failed (unknown name/version, etc.)."""
