"""
Exception hierarchy.  Every error carries the CLI exit code it maps to:

    2  input / geometry error
    3  planning failure
    4  detection failure
"""


class DeskAsmError(Exception):
    exit_code = 1


# ---------------------------------------------------------------- input / geometry
class InputError(DeskAsmError):
    exit_code = 2


class PreconditionError(InputError, ValueError):
    pass


class MeshError(InputError):
    pass


class MeshParseError(MeshError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class EmptyMeshError(MeshError):
    pass


class NonWatertightError(MeshError):
    pass


class DegenerateGeometryError(InputError):
    pass


class PlacementError(InputError):
    pass


class SchemaError(InputError):
    def __init__(self, msg: str, key: str | None = None):
        self.key = key
        super().__init__(msg)


class DegenerateConfigurationError(InputError):
    pass


class BehindCameraError(InputError):
    pass


# ---------------------------------------------------------------- planning
class PlanningError(DeskAsmError):
    exit_code = 3


class NoPathError(PlanningError):
    def __init__(self, msg: str, diagnostics: dict | None = None):
        self.diagnostics = diagnostics or {}
        super().__init__(msg)


class MotionTimeoutError(PlanningError):
    pass


class AssemblyCollisionError(PlanningError):
    pass


# ---------------------------------------------------------------- detection
class DetectionError(DeskAsmError):
    exit_code = 4


class NoPlaneFoundError(DetectionError):
    pass


class NoSegmentError(DetectionError):
    pass


class AllCandidatesDivergedError(DetectionError):
    pass


# ---------------------------------------------------------------- pipeline
class StageError(DeskAsmError):
    """A failure inside a pipeline stage, labelled with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"{stage}: {cause}")
