"""Profile conformance checking for Process, Workflow and Provenance Run Crates.

The three rule sets nest: validating against Workflow applies the Process
rules too, and Provenance applies both. Every finding is reported as an
issue; validation itself never fails on a parsed document.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .model import (
    CrateDocument,
    Entity,
    Reference,
    declared_profiles,
    is_absolute_iri,
    parse_timestamp,
    resolve,
)
from .terms import (
    METADATA_DESCRIPTOR_ID,
    PROFILE_SPECIFICITY,
    PROFILES,
    ProfileId,
    ProfileKind,
    WORKFLOW_RO_CRATE_PROFILE_IRI,
)


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


_SEVERITY_RANK = {Severity.ERROR: 0, Severity.WARNING: 1, Severity.INFO: 2}

#: Types acceptable as a CreateAction instrument (rule P2).
_INSTRUMENT_TYPES = ("SoftwareApplication", "SoftwareSourceCode", "ComputationalWorkflow")

#: Types acceptable as action inputs/outputs (rule P5).
_IO_TYPES = ("MediaObject", "Dataset", "Collection", "PropertyValue")

_ACTION_STATUSES = ("CompletedActionStatus", "FailedActionStatus")


@dataclass(frozen=True)
class ValidationIssue:
    severity: Severity
    code: str
    subject: str | None
    profile: ProfileKind
    message: str


@dataclass(frozen=True)
class ValidationReport:
    profile: ProfileId
    issues: tuple[ValidationIssue, ...]
    conformant: bool

    def errors(self) -> list[ValidationIssue]:
        return [i for i in self.issues if i.severity is Severity.ERROR]

    def to_text(self) -> str:
        lines = [
            f"{i.severity.value.upper()} {i.code} {i.subject or '-'}: {i.message}"
            for i in self.issues
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def to_json(self) -> str:
        payload = {
            "profile": self.profile.kind.value,
            "profileIri": self.profile.iri,
            "conformant": self.conformant,
            "issues": [
                {
                    "severity": i.severity.value,
                    "code": i.code,
                    "subject": i.subject,
                    "message": i.message,
                }
                for i in self.issues
            ],
        }
        return json.dumps(payload, indent=2) + "\n"


class _Collector:
    def __init__(self, profile: ProfileKind):
        self.profile = profile
        self.issues: list[ValidationIssue] = []

    def add(self, severity: Severity, code: str, subject: str | None, message: str):
        self.issues.append(
            ValidationIssue(severity, code, subject, self.profile, message)
        )


def _action_status(entity: Entity) -> str | None:
    """Normalize an actionStatus value to its bare schema.org name."""
    value = entity.first("actionStatus")
    if value is None:
        return None
    raw = value.id if isinstance(value, Reference) else str(value)
    for prefix in ("https://schema.org/", "http://schema.org/"):
        if raw.startswith(prefix):
            return raw[len(prefix):]
    return raw


def _entities_typed(doc: CrateDocument, type_name: str) -> list[Entity]:
    return [e for e in doc.entities.values() if e.has_type(type_name)]


def _main_workflow(doc: CrateDocument) -> Entity | None:
    refs = doc.root.refs("mainEntity") if _has_root(doc) else []
    return resolve(doc, refs[0]) if refs else None


def _has_root(doc: CrateDocument) -> bool:
    descriptor = doc.entities.get(METADATA_DESCRIPTOR_ID)
    if descriptor is None:
        return False
    about = descriptor.refs("about")
    return len(about) == 1 and about[0] in doc.entities


def _workflow_level_actions(doc: CrateDocument, workflow: Entity) -> list[Entity]:
    return [
        a
        for a in _entities_typed(doc, "CreateAction")
        if workflow.id in a.refs("instrument")
    ]


def _common_rules(doc: CrateDocument, c: _Collector, profile: ProfileId, payload_check: bool):
    # C1: descriptor present and 'about' resolves to the root.
    descriptor = doc.entities.get(METADATA_DESCRIPTOR_ID)
    if descriptor is None:
        c.add(Severity.ERROR, "C1_DESCRIPTOR", None,
              f"no {METADATA_DESCRIPTOR_ID!r} metadata descriptor in graph")
    else:
        about = descriptor.refs("about")
        if len(about) != 1 or about[0] not in doc.entities:
            c.add(Severity.ERROR, "C1_DESCRIPTOR", descriptor.id,
                  "descriptor 'about' must reference exactly one in-graph root entity")

    # C2: the root declares conformance to the requested profile.
    if _has_root(doc):
        declared = doc.root.refs("conformsTo") + doc.descriptor.refs("conformsTo")
        if profile.iri not in declared:
            prefix = profile.iri.rsplit("/", 1)[0] + "/"
            near = [d for d in declared if d.startswith(prefix)]
            if near:
                c.add(Severity.WARNING, "C2_PROFILE_DECLARATION", doc.root.id,
                      f"'conformsTo' declares {near[0]} instead of {profile.iri} "
                      "(version mismatch)")
            else:
                c.add(Severity.WARNING, "C2_PROFILE_DECLARATION", doc.root.id,
                      f"'conformsTo' does not declare the requested profile {profile.iri}")

    # C3/C4: reference resolution.
    seen_external: set[str] = set()
    for entity in doc.entities.values():
        for term, values in entity.properties.items():
            for value in values:
                if not isinstance(value, Reference) or value.id in doc.entities:
                    continue
                if is_absolute_iri(value.id):
                    if value.id not in seen_external:
                        seen_external.add(value.id)
                        c.add(Severity.INFO, "C4_EXTERNAL_REF", entity.id,
                              f"absolute-IRI reference {value.id} ({term}) "
                              "does not resolve in-graph")
                else:
                    c.add(Severity.ERROR, "C3_DANGLING_REF", entity.id,
                          f"local reference {value.id!r} ({term}) does not resolve")

    # C5: payload existence, only on request.
    if payload_check:
        if doc.source_path is None:
            c.add(Severity.WARNING, "C5_PAYLOAD_MISSING", None,
                  "payload check requested but the document has no source path")
        else:
            for entity in doc.entities.values():
                if entity.id in (METADATA_DESCRIPTOR_ID, "./"):
                    continue
                if not (entity.has_type("File") or entity.has_type("Dataset")):
                    continue
                if entity.id.startswith("#") or is_absolute_iri(entity.id):
                    continue
                if not (doc.source_path / entity.id).exists():
                    c.add(Severity.WARNING, "C5_PAYLOAD_MISSING", entity.id,
                          f"payload {entity.id!r} not found under {doc.source_path}")


def _check_times(action: Entity, c: _Collector):
    start_raw = action.first("startTime")
    end_raw = action.first("endTime")
    missing = [t for t, v in (("startTime", start_raw), ("endTime", end_raw)) if v is None]
    if missing:
        c.add(Severity.WARNING, "P4_MISSING", action.id,
              f"no {' or '.join(missing)} recorded")
    start = end = None
    for term, raw in (("startTime", start_raw), ("endTime", end_raw)):
        if raw is None:
            continue
        stamp = parse_timestamp(raw) if isinstance(raw, str) else None
        if stamp is None:
            c.add(Severity.ERROR, "P4_TIME", action.id,
                  f"{term} {raw!r} is not ISO 8601 with an explicit offset")
        elif term == "startTime":
            start = stamp
        else:
            end = stamp
    if start is not None and end is not None and end < start:
        c.add(Severity.ERROR, "P4_TIME", action.id, "endTime precedes startTime")


def _process_rules(doc: CrateDocument, c: _Collector):
    actions = _entities_typed(doc, "CreateAction")

    # P1: at least one execution is described.
    if not actions:
        c.add(Severity.ERROR, "P1_NO_ACTION", None, "no CreateAction entity in crate")

    for action in actions:
        # P2: instrument present and application-typed.
        instruments = action.refs("instrument")
        if not instruments:
            c.add(Severity.ERROR, "P2_INSTRUMENT_TYPE", action.id,
                  "CreateAction has no 'instrument'")
        for ref in instruments:
            target = resolve(doc, ref)
            if target is None or not any(target.has_type(t) for t in _INSTRUMENT_TYPES):
                c.add(Severity.ERROR, "P2_INSTRUMENT_TYPE", action.id,
                      f"instrument {ref!r} does not resolve to an entity typed "
                      "SoftwareApplication, SoftwareSourceCode or ComputationalWorkflow")

        # P3: executing agent.
        agents = action.refs("agent")
        if not agents:
            c.add(Severity.WARNING, "P3_AGENT", action.id, "no 'agent' recorded")
        else:
            for ref in agents:
                target = resolve(doc, ref)
                if target is None or not (
                    target.has_type("Person") or target.has_type("Organization")
                ):
                    c.add(Severity.WARNING, "P3_AGENT", action.id,
                          f"agent {ref!r} is not a Person or Organization")

        # P4: timestamps.
        _check_times(action, c)

        # P5: input/output typing.
        for term in ("object", "result"):
            for value in action.get(term):
                if isinstance(value, Reference):
                    target = resolve(doc, value)
                    # Unresolvable members are already covered by C3/C4.
                    if target is not None and not any(
                        target.has_type(t) for t in _IO_TYPES
                    ):
                        c.add(Severity.WARNING, "P5_IO_TYPE", action.id,
                              f"{term} member {value.id!r} is not typed File/MediaObject, "
                              "Dataset, Collection or PropertyValue")
                else:
                    c.add(Severity.WARNING, "P5_IO_TYPE", action.id,
                          f"{term} carries inline literal {value!r} instead of an entity")

        # P7: action status vocabulary and error reporting.
        status = _action_status(action)
        if status is not None:
            if status not in _ACTION_STATUSES:
                c.add(Severity.WARNING, "P7_ACTION_STATUS", action.id,
                      f"actionStatus {status!r} is not CompletedActionStatus "
                      "or FailedActionStatus")
            elif status == "FailedActionStatus" and action.first("error") is None:
                c.add(Severity.WARNING, "P7_ACTION_STATUS", action.id,
                      "FailedActionStatus without an 'error' description")

    # P6: collections reference their main part.
    for collection in _entities_typed(doc, "Collection"):
        parts = set(collection.refs("hasPart"))
        for main in collection.refs("mainEntity"):
            if main not in parts:
                c.add(Severity.ERROR, "P6_COLLECTION_MAIN_ENTITY", collection.id,
                      f"mainEntity {main!r} is not among the collection's hasPart members")


def _formal_params(doc: CrateDocument, entity: Entity) -> tuple[list[str], list[str]]:
    return entity.refs("input"), entity.refs("output")


def _workflow_rules(doc: CrateDocument, c: _Collector):
    if not _has_root(doc):
        return
    workflow = _main_workflow(doc)

    # W1: the root points at a workflow with the three required types.
    required = ("File", "SoftwareSourceCode", "ComputationalWorkflow")
    if workflow is None or not all(workflow.has_type(t) for t in required):
        subject = workflow.id if workflow is not None else doc.root.id
        c.add(Severity.ERROR, "W1_MAIN_WORKFLOW", subject,
              "root 'mainEntity' must resolve to a workflow typed File/MediaObject, "
              "SoftwareSourceCode and ComputationalWorkflow")

    # W6: companion profile declaration.
    declared = doc.root.refs("conformsTo") + doc.descriptor.refs("conformsTo")
    if WORKFLOW_RO_CRATE_PROFILE_IRI not in declared:
        c.add(Severity.WARNING, "W6_COMPANION_PROFILE", doc.root.id,
              f"'conformsTo' lacks the Workflow RO-Crate profile "
              f"{WORKFLOW_RO_CRATE_PROFILE_IRI}")

    if workflow is None:
        return

    # W2: workflow language.
    language_refs = workflow.refs("programmingLanguage")
    language = resolve(doc, language_refs[0]) if language_refs else None
    if language is None or not language.has_type("ComputerLanguage"):
        c.add(Severity.WARNING, "W2_LANGUAGE", workflow.id,
              "workflow has no 'programmingLanguage' resolving to a ComputerLanguage")

    # W3: at least one workflow-level execution.
    wf_actions = _workflow_level_actions(doc, workflow)
    if not wf_actions:
        c.add(Severity.ERROR, "W3_WORKFLOW_ACTION", workflow.id,
              "no CreateAction has the main workflow as its 'instrument'")

    # W4: formal parameter declarations.
    wf_inputs, wf_outputs = _formal_params(doc, workflow)
    for ref in wf_inputs + wf_outputs:
        target = resolve(doc, ref)
        if target is not None and not target.has_type("FormalParameter"):
            c.add(Severity.WARNING, "W4_FORMAL_PARAMS", workflow.id,
                  f"workflow parameter {ref!r} is not typed FormalParameter")
    for param in _entities_typed(doc, "FormalParameter"):
        missing = [t for t in ("additionalType", "name") if param.first(t) is None]
        if missing:
            c.add(Severity.WARNING, "W4_FORMAL_PARAMS", param.id,
                  f"FormalParameter lacks {' and '.join(missing)}")

    # W5: workflow-run values link back to workflow parameters.
    wf_params = set(wf_inputs + wf_outputs)
    for action in wf_actions:
        for term in ("object", "result"):
            for ref in action.refs(term):
                target = resolve(doc, ref)
                if target is None:
                    continue
                if not wf_params.intersection(target.refs("exampleOfWork")):
                    c.add(Severity.WARNING, "W5_EXAMPLE_OF_WORK", target.id,
                          f"{term} member of {action.id!r} has no 'exampleOfWork' "
                          "link into the workflow's parameters")


def _provenance_rules(doc: CrateDocument, c: _Collector):
    if not _has_root(doc):
        return
    workflow = _main_workflow(doc)

    steps: list[Entity] = []
    if workflow is not None:
        # V2: step members are HowToSteps.
        for ref in workflow.refs("step"):
            target = resolve(doc, ref)
            if target is None or not target.has_type("HowToStep"):
                c.add(Severity.ERROR, "V2_STEP", workflow.id,
                      f"workflow step {ref!r} does not resolve to a HowToStep")

    for step in _entities_typed(doc, "HowToStep"):
        steps.append(step)
        tools = [resolve(doc, ref) for ref in step.refs("workExample")]
        if not tools or any(
            t is None or not any(t.has_type(k) for k in _INSTRUMENT_TYPES) for t in tools
        ):
            c.add(Severity.ERROR, "V2_STEP", step.id,
                  "HowToStep lacks a 'workExample' resolving to a tool")

    # V1: the workflow aggregates every tool its steps point to.
    if workflow is not None:
        has_part = set(workflow.refs("hasPart"))
        step_ids = set(workflow.refs("step"))
        for step in steps:
            if step.id not in step_ids:
                continue
            for tool_id in step.refs("workExample"):
                if tool_id not in has_part:
                    c.add(Severity.ERROR, "V1_TOOL_HASPART", workflow.id,
                          f"tool {tool_id!r} (workExample of {step.id!r}) missing "
                          "from the workflow's 'hasPart'")

    # V3: step executions control the right tool executions.
    for control in _entities_typed(doc, "ControlAction"):
        instruments = control.refs("instrument")
        control_steps = [resolve(doc, ref) for ref in instruments]
        if not control_steps or any(
            s is None or not s.has_type("HowToStep") for s in control_steps
        ):
            c.add(Severity.ERROR, "V3_CONTROL_ACTION", control.id,
                  "ControlAction 'instrument' must be a HowToStep")
            continue
        allowed_tools = set()
        for s in control_steps:
            allowed_tools.update(s.refs("workExample"))
        for ref in control.refs("object"):
            target = resolve(doc, ref)
            if target is None or not target.has_type("CreateAction"):
                continue
            if not allowed_tools.intersection(target.refs("instrument")):
                c.add(Severity.ERROR, "V3_CONTROL_ACTION", control.id,
                      f"controlled action {ref!r} does not run the step's workExample tool")

    # V4: orchestration by the workflow engine.
    organize_actions = _entities_typed(doc, "OrganizeAction")
    if not organize_actions:
        c.add(Severity.WARNING, "V4_MISSING", None,
              "no OrganizeAction describing the workflow engine run")
    wf_action_ids = {
        a.id for a in _workflow_level_actions(doc, workflow)
    } if workflow is not None else set()
    for organize in organize_actions:
        instruments = [resolve(doc, ref) for ref in organize.refs("instrument")]
        if not instruments or any(
            i is None or not i.has_type("SoftwareApplication") for i in instruments
        ):
            c.add(Severity.ERROR, "V4_ORGANIZE", organize.id,
                  "OrganizeAction 'instrument' must be a SoftwareApplication")
        if not wf_action_ids.intersection(organize.refs("result")):
            c.add(Severity.ERROR, "V4_ORGANIZE", organize.id,
                  "OrganizeAction 'result' must be the workflow-level CreateAction")
        for ref in organize.refs("object"):
            target = resolve(doc, ref)
            if target is not None and not target.has_type("ControlAction"):
                c.add(Severity.INFO, "V4_EXTRA_OBJECT", organize.id,
                      f"non-ControlAction object member {ref!r} "
                      "(accepted, e.g. an engine configuration file)")

    # V5: parameter connections.
    step_ids = {s.id for s in steps}
    for entity in doc.entities.values():
        if "connection" not in entity.properties:
            continue
        is_workflow = workflow is not None and entity.id == workflow.id
        if not is_workflow and entity.id not in step_ids:
            c.add(Severity.ERROR, "V5_PARAM_CONNECTION", entity.id,
                  "'connection' is only allowed on the workflow or a HowToStep")
    for pc in _entities_typed(doc, "ParameterConnection"):
        for term in ("sourceParameter", "targetParameter"):
            refs = pc.refs(term)
            if not refs or any(resolve(doc, r) is None for r in refs):
                c.add(Severity.ERROR, "V5_PARAM_CONNECTION", pc.id,
                      f"{term} is missing or does not resolve")

    # V6: tool-run values link back to the tool's parameters.
    if workflow is None:
        return
    for action in _entities_typed(doc, "CreateAction"):
        instruments = action.refs("instrument")
        if not instruments or workflow.id in instruments:
            continue
        tool = resolve(doc, instruments[0])
        if tool is None:
            continue
        tool_inputs, tool_outputs = _formal_params(doc, tool)
        tool_params = set(tool_inputs + tool_outputs)
        if not tool_params:
            continue
        for term in ("object", "result"):
            for ref in action.refs(term):
                target = resolve(doc, ref)
                if target is None:
                    continue
                if not tool_params.intersection(target.refs("exampleOfWork")):
                    c.add(Severity.WARNING, "V6_TOOL_EXAMPLE_OF_WORK", target.id,
                          f"{term} member of {action.id!r} has no 'exampleOfWork' "
                          "link into the tool's parameters")


_RULE_SETS: dict[ProfileKind, tuple[Callable, ...]] = {
    ProfileKind.PROCESS: (_process_rules,),
    ProfileKind.WORKFLOW: (_process_rules, _workflow_rules),
    ProfileKind.PROVENANCE: (_process_rules, _workflow_rules, _provenance_rules),
}


def _sorted_issues(issues: list[ValidationIssue]) -> tuple[ValidationIssue, ...]:
    return tuple(
        sorted(issues, key=lambda i: (_SEVERITY_RANK[i.severity], i.code, i.subject or ""))
    )


def validate(
    doc: CrateDocument, profile: ProfileId, payload_check: bool = False
) -> ValidationReport:
    """Check a document against a profile's rules plus all inherited rules."""
    collector = _Collector(profile.kind)
    _common_rules(doc, collector, profile, payload_check)
    for rule_set in _RULE_SETS[profile.kind]:
        rule_set(doc, collector)
    issues = _sorted_issues(collector.issues)
    conformant = not any(i.severity is Severity.ERROR for i in issues)
    return ValidationReport(profile=profile, issues=issues, conformant=conformant)


def validate_auto(doc: CrateDocument, payload_check: bool = False) -> ValidationReport:
    """Validate against the most specific declared profile.

    Documents declaring no run profile are checked against Process rules,
    with an informational note recording the default.
    """
    declared = declared_profiles(doc)
    if declared:
        profile = max(declared, key=lambda p: PROFILE_SPECIFICITY[p.kind])
        return validate(doc, PROFILES[profile.kind], payload_check)
    report = validate(doc, PROFILES[ProfileKind.PROCESS], payload_check)
    note = ValidationIssue(
        Severity.INFO,
        "AUTO_DEFAULTED",
        None,
        ProfileKind.PROCESS,
        "no run profile declared; defaulted to Process rules",
    )
    issues = _sorted_issues(list(report.issues) + [note])
    return ValidationReport(report.profile, issues, report.conformant)
