"""Exception types shared across the toolkit."""


class TravrankError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(TravrankError):
    pass


class DuplicateImageId(ManifestError):
    pass


class BadImageDimensions(ManifestError):
    pass


class UnknownImageId(TravrankError):
    pass


class AnnotationError(TravrankError):
    pass


class OutOfBoundsPoint(AnnotationError):
    pass


class MinDistanceViolation(AnnotationError):
    pass


class KindMismatch(AnnotationError):
    pass


class InvalidLabel(AnnotationError):
    pass


class DuplicateAnnotationId(AnnotationError):
    pass


class SingleImageDataset(TravrankError):
    pass


class UnknownClassId(TravrankError):
    pass


class EmptyAnnotationSet(TravrankError):
    pass


class ShapeMismatch(TravrankError):
    pass


class EmptySet(TravrankError):
    pass


class EmptyTier(TravrankError):
    pass


class NonMonotoneCutoffs(TravrankError):
    pass


class TrainingDiverged(TravrankError):
    pass


class TaskPoolError(TravrankError):
    pass


class UnknownTask(TaskPoolError):
    pass


class LeaseExpired(TaskPoolError):
    pass


class AlreadyLabeled(TaskPoolError):
    pass


class NothingToUndo(TaskPoolError):
    pass


class NoPendingTasks(TaskPoolError):
    pass
