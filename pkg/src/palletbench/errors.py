"""Exception hierarchy shared across the benchmark."""

from __future__ import annotations


class PalletBenchError(Exception):
    """Base class; carries a stable machine-readable code."""

    code = "error"

    def __init__(self, message: str = "", code: str | None = None):
        super().__init__(message or self.__class__.code)
        if code is not None:
            self.code = code


class SceneError(PalletBenchError):
    """Invalid scene construction or scene-level constraint violation."""

    code = "scene-error"


class CapacityError(SceneError):
    code = "capacity-infeasible"


class PlacementExhaustedError(SceneError):
    code = "placement-exhausted"


class ActionError(PalletBenchError):
    """Structural failure while executing a pick-and-place action."""

    code = "action-error"


class PerceptionError(PalletBenchError):
    code = "perception-error"


class EmptyMaskError(PerceptionError):
    code = "empty-mask"


class EntityAbsentError(PerceptionError):
    code = "entity-absent-from-cloud"


class DeadEndError(PalletBenchError):
    """Oracle found no valid action with the goal unsatisfied; indicates a task bug."""

    code = "dead-end"


class ProtocolError(PalletBenchError):
    """External policy violated the wire protocol."""

    code = "policy-protocol-violation"


class DatasetError(PalletBenchError):
    code = "dataset-error"


class SchemaMismatchError(DatasetError):
    code = "schema-mismatch"


class CorruptSampleError(DatasetError):
    code = "corrupt-sample"


class StructureMismatchError(PalletBenchError):
    code = "structure-mismatch"
