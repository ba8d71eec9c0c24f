"""Exception hierarchy for the wrcrate toolkit."""

from __future__ import annotations


class WrcrateError(Exception):
    """Base class for all toolkit errors."""


# -- crate parsing ----------------------------------------------------------

class CrateParseError(WrcrateError):
    """A crate metadata document could not be turned into a valid graph."""


class MalformedJsonError(CrateParseError):
    pass


class MissingGraphError(CrateParseError):
    pass


class MissingContextError(CrateParseError):
    pass


class DuplicateEntityIdError(CrateParseError):
    def __init__(self, entity_id: str):
        super().__init__(f"duplicate entity id: {entity_id!r}")
        self.entity_id = entity_id


class EntityWithoutIdError(CrateParseError):
    def __init__(self, index: int):
        super().__init__(f"graph member at index {index} has no '@id'")
        self.index = index


class NestedEntityError(CrateParseError):
    """A property value was an object other than a plain ``{"@id": ...}``."""

    def __init__(self, entity_id: str, term: str):
        super().__init__(
            f"nested entity object in property {term!r} of {entity_id!r}; "
            "the graph must be flattened"
        )
        self.entity_id = entity_id
        self.term = term


class MissingMetadataDescriptorError(CrateParseError):
    pass


class MissingRootEntityError(CrateParseError):
    pass


# -- provenance export ------------------------------------------------------

class DanglingReferenceError(WrcrateError):
    """An action references a local entity that is not in the graph."""

    def __init__(self, ref_id: str):
        super().__init__(f"action references unresolvable local entity {ref_id!r}")
        self.ref_id = ref_id


# -- run plans and execution ------------------------------------------------

class PlanError(WrcrateError):
    """A run plan could not be loaded or is internally inconsistent."""


class MalformedPlanError(PlanError):
    pass


class CyclicDataflowError(PlanError):
    pass


class UnknownParamError(PlanError):
    def __init__(self, param_id: str, context: str = ""):
        msg = f"unknown parameter {param_id!r}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)
        self.param_id = param_id


class DuplicateStepIdError(PlanError):
    def __init__(self, step_id: str):
        super().__init__(f"duplicate step id: {step_id!r}")
        self.step_id = step_id


class RunError(WrcrateError):
    """A plan execution could not be started or completed."""


class MissingInputError(RunError):
    def __init__(self, param_id: str, detail: str = ""):
        msg = f"missing input for parameter {param_id!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.param_id = param_id


class StepSpawnFailureError(RunError):
    def __init__(self, step_id: str, detail: str = ""):
        msg = f"could not spawn command for step {step_id!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.step_id = step_id


class OutDirNotWritableError(RunError):
    def __init__(self, path: str):
        super().__init__(f"output directory not writable: {path}")
        self.path = path
