"""Exception hierarchy shared by all fibernet modules."""


class FibernetError(Exception):
    """Base class for every error raised by the package."""

    code = "fibernet-error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class InvalidGeometryError(FibernetError, ValueError):
    code = "invalid-geometry"


class SnapBackError(FibernetError):
    """Return mapping denominator is nonpositive (element longer than EA/|H|)."""

    code = "snap-back"


class SingularCondensationError(FibernetError):
    code = "singular-condensation"


class SingularMatrixError(FibernetError):
    """Global factorization hit a zero pivot."""

    code = "singular-matrix"

    def __init__(self, message: str, dof: int = -1):
        super().__init__(message)
        self.dof = dof

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["dof"] = int(self.dof)
        return out


class ElementError(FibernetError):
    """Wraps an element-level failure with the offending element id."""

    code = "element-error"

    def __init__(self, element_id: int, cause: Exception):
        super().__init__(f"element {element_id}: {cause}")
        self.element_id = element_id
        self.cause = cause

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["element"] = int(self.element_id)
        out["cause"] = getattr(self.cause, "code", type(self.cause).__name__)
        return out


class GenerationError(FibernetError):
    """Random network does not connect the fixed grip to the moving grip."""

    code = "generation-failed"

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["percolation"] = self.report
        return out


class NotchError(GenerationError):
    code = "notch-disconnects"


class GripError(FibernetError, ValueError):
    code = "empty-grip"
