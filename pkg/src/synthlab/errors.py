"""Exception hierarchy shared across the pipeline."""


class SynthlabError(Exception):
    """Base class for all pipeline failures."""


class ManifestError(SynthlabError):
    """Manifest file or record invariants violated."""


class CatalogError(SynthlabError):
    """Class catalog invariants violated."""


class PhantomError(SynthlabError):
    """Invalid phantom specification or generation failure."""


class ConfigError(SynthlabError):
    """Invalid configuration object or config file."""


class TrainingError(SynthlabError):
    """Training diverged or violated a runtime contract."""


class CheckpointError(SynthlabError):
    """Checkpoint file missing, corrupt, or incompatible."""


class FingerprintMismatchError(SynthlabError):
    """Artifacts built against different parents were combined."""


class AnnotationError(SynthlabError):
    """Annotation bundle invalid or degenerate."""


class FoldError(SynthlabError):
    """Cross-validation split cannot be constructed as requested."""


class ConditionError(SynthlabError):
    """Data condition cannot be materialized from the given fold."""


class MetricError(SynthlabError):
    """Metric inputs outside the operation's domain."""


class ReportError(SynthlabError):
    """Run store or report rendering failure."""
