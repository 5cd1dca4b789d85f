"""Exception types shared across the package."""


class GroupDanceError(Exception):
    """Base class for all package errors."""


class ShapeMismatch(GroupDanceError):
    """Tensor shapes are inconsistent with the operation's contract."""


class DegenerateInput(GroupDanceError):
    """Numerically degenerate input, e.g. a near-zero vector fed to Gram-Schmidt."""


class InvalidConfig(GroupDanceError):
    """Configuration value outside its allowed range."""


class InvalidStep(GroupDanceError):
    """Diffusion step index outside the valid range for the operation."""


class InvalidLength(GroupDanceError):
    """Sequence length incompatible with the requested window plan."""


class NumericalDegeneracy(GroupDanceError):
    """Non-finite intermediate in a discretization or recurrence."""


class FormatError(GroupDanceError):
    """Malformed, truncated, or version-incompatible container file."""


class NonFiniteLoss(GroupDanceError):
    """Training loss became NaN or infinite."""
