"""Exception types shared across the toolkit."""


class OaprError(Exception):
    """Base class for all toolkit errors."""


class UnmappedAttribute(OaprError):
    """A raw attribute name has no entry in the verbalization rules."""

    def __init__(self, raw_name: str):
        super().__init__(f"no verbalization rule for attribute {raw_name!r}")
        self.raw_name = raw_name


class EmptyPhrase(OaprError):
    """A verbalization rule maps an attribute to blank text."""


class ProviderFailure(OaprError):
    """A phrase-embedding provider could not produce a usable vector."""


class TooManyClusters(OaprError):
    """Requested more clusters than there are records to cluster."""


class ShapeMismatch(OaprError):
    """Tensor input does not match the shape the operation expects."""


class NonFiniteOutput(OaprError):
    """An encoder produced NaN or infinite values."""


class TemplateError(OaprError):
    """A prompt template is missing its single class placeholder."""


class DegenerateEnsemble(OaprError):
    """Template embeddings cancelled out; the ensemble mean has ~zero norm."""


class ContextOverflow(OaprError):
    """Context prompt plus phrase tokens exceed the text encoder budget."""


class DegenerateBatch(OaprError):
    """No attribute in the batch has a single positive image."""


class NonFiniteLoss(OaprError):
    """A loss term became NaN or infinite."""


class ImageLoadError(OaprError):
    """A gallery image could not be loaded."""

    def __init__(self, image_id: str, reason: str = ""):
        msg = f"cannot load image {image_id!r}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)
        self.image_id = image_id


class EmptyGallery(OaprError):
    """Query scoring was asked to rank an empty gallery."""


class RankingLengthMismatch(OaprError):
    """A ranking does not contain exactly K entries."""


class FingerprintMismatch(OaprError):
    """Checkpoint, index, and configured encoder do not agree."""
