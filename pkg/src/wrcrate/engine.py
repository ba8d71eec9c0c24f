"""Declarative run plans: load, execute, and package runs as crates.

A plan is a small JSON description of command-line steps wired together by
file dataflow. Executing one runs the steps sequentially in dependency
order inside an output directory, stages all input and produced files
there, and emits a crate capturing both the plan (workflow, steps, tools,
formal parameters, connections) and the run (actions, timings, statuses).

Parameter ids are scoped to their owner (the workflow or one step), so two
steps may both declare a ``selection`` parameter. Bindings and connections
name parameters by bare id and are resolved direction-aware: value sources
are workflow inputs or step outputs, value targets are step inputs or
workflow outputs. An ``owner.param`` spelling (step id or ``workflow``)
disambiguates when two scopes share a name.
"""

from __future__ import annotations

import json
import os
import re
import shutil
import subprocess
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import (
    CyclicDataflowError,
    DuplicateStepIdError,
    MalformedPlanError,
    MissingInputError,
    OutDirNotWritableError,
    StepSpawnFailureError,
    UnknownParamError,
)
from .model import CrateDocument, Entity, Reference, Value, serialize_crate
from .terms import (
    METADATA_DESCRIPTOR_ID,
    PROCESS_PROFILE,
    PROVENANCE_PROFILE,
    RO_CRATE_SPEC_IRI,
    SCHEMA_ORG,
    WORKFLOW_PROFILE,
    WORKFLOW_RO_CRATE_PROFILE_IRI,
)

ENGINE_NAME = "wrcrate-engine"
PLAN_LANGUAGE_NAME = "wrcrate run plan"

_DIRECTIONS = ("in", "out")
_PARAM_TYPES = ("File", "Text", "Integer", "Collection")

#: Workflow-scope marker used in resolved parameter endpoints.
WORKFLOW_SCOPE = ""

_PLACEHOLDER_RE = re.compile(r"\{([^{}]+)\}")
_STDERR_LIMIT = 500


@dataclass(frozen=True)
class PlanParam:
    id: str
    direction: str  # "in" | "out"
    type: str  # "File" | "Text" | "Integer" | "Collection"
    encoding_format: str | None = None


@dataclass(frozen=True)
class RunStep:
    id: str
    tool_id: str
    command_template: str
    params: tuple[PlanParam, ...]
    bindings: dict[str, str]

    def param(self, param_id: str) -> PlanParam | None:
        for p in self.params:
            if p.id == param_id:
                return p
        return None

    @property
    def in_params(self) -> list[PlanParam]:
        return [p for p in self.params if p.direction == "in"]

    @property
    def out_params(self) -> list[PlanParam]:
        return [p for p in self.params if p.direction == "out"]


#: A resolved parameter endpoint: (owner scope, param id); the workflow
#: scope is WORKFLOW_SCOPE, otherwise the step id.
Endpoint = tuple[str, str]


@dataclass(frozen=True)
class Connection:
    source: str
    target: str
    owner: str
    resolved_source: Endpoint
    resolved_target: Endpoint


@dataclass(frozen=True)
class RunPlan:
    name: str
    workflow_id: str
    params: tuple[PlanParam, ...]
    steps: tuple[RunStep, ...]
    connections: tuple[Connection, ...]
    deterministic_ids: bool = False
    env_allowlist: tuple[str, ...] = ()
    source_text: str = ""

    def step(self, step_id: str) -> RunStep:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(step_id)

    @property
    def in_params(self) -> list[PlanParam]:
        return [p for p in self.params if p.direction == "in"]

    @property
    def out_params(self) -> list[PlanParam]:
        return [p for p in self.params if p.direction == "out"]

    def dependency_edges(self) -> list[tuple[str, str]]:
        """Step dependency pairs (upstream, downstream) from bindings."""
        edges = set()
        for step in self.steps:
            for source in _resolved_sources(self, step):
                if source[0] not in (WORKFLOW_SCOPE, step.id):
                    edges.add((source[0], step.id))
        return sorted(edges)


def _resolved_sources(plan: RunPlan, step: RunStep) -> list[Endpoint]:
    return [_resolve_source(plan, key, f"binding of step {step.id!r}") for key in step.bindings]


def _param_spec(raw: object, where: str) -> PlanParam:
    if not isinstance(raw, dict):
        raise MalformedPlanError(f"{where}: parameter entries must be objects")
    param_id = raw.get("id")
    direction = raw.get("direction")
    param_type = raw.get("type")
    if not isinstance(param_id, str) or not param_id:
        raise MalformedPlanError(f"{where}: parameter without a string 'id'")
    if "." in param_id:
        raise MalformedPlanError(f"{where}: parameter id {param_id!r} may not contain '.'")
    if direction not in _DIRECTIONS:
        raise MalformedPlanError(
            f"{where}: parameter {param_id!r} direction must be one of {_DIRECTIONS}"
        )
    if param_type not in _PARAM_TYPES:
        raise MalformedPlanError(
            f"{where}: parameter {param_id!r} type must be one of {_PARAM_TYPES}"
        )
    encoding = raw.get("encodingFormat")
    if encoding is not None and not isinstance(encoding, str):
        raise MalformedPlanError(f"{where}: encodingFormat must be a string")
    return PlanParam(param_id, direction, param_type, encoding)


def _split_qualified(name: str) -> tuple[str | None, str]:
    if "." in name:
        owner, _, bare = name.partition(".")
        return owner, bare
    return None, name


def _resolve_source(plan: RunPlan, name: str, context: str) -> Endpoint:
    """A value source is a workflow 'in' param or some step's 'out' param."""
    owner, bare = _split_qualified(name)
    candidates: list[Endpoint] = []
    if owner in (None, "workflow"):
        if any(p.id == bare for p in plan.in_params):
            candidates.append((WORKFLOW_SCOPE, bare))
    for step in plan.steps:
        if owner in (None, step.id) and any(p.id == bare for p in step.out_params):
            candidates.append((step.id, bare))
    if not candidates:
        raise UnknownParamError(name, context)
    if len(candidates) > 1:
        raise MalformedPlanError(
            f"{context}: parameter name {name!r} is ambiguous; qualify it as 'owner.param'"
        )
    return candidates[0]


def _resolve_target(plan: RunPlan, name: str, context: str) -> Endpoint:
    """A value target is some step's 'in' param or a workflow 'out' param."""
    owner, bare = _split_qualified(name)
    candidates: list[Endpoint] = []
    if owner in (None, "workflow"):
        if any(p.id == bare for p in plan.out_params):
            candidates.append((WORKFLOW_SCOPE, bare))
    for step in plan.steps:
        if owner in (None, step.id) and any(p.id == bare for p in step.in_params):
            candidates.append((step.id, bare))
    if not candidates:
        raise UnknownParamError(name, context)
    if len(candidates) > 1:
        raise MalformedPlanError(
            f"{context}: parameter name {name!r} is ambiguous; qualify it as 'owner.param'"
        )
    return candidates[0]


def _check_acyclic(plan: RunPlan):
    deps: dict[str, set[str]] = {s.id: set() for s in plan.steps}
    for step in plan.steps:
        for source in _resolved_sources(plan, step):
            if source[0] != WORKFLOW_SCOPE:
                if source[0] == step.id:
                    raise CyclicDataflowError(
                        f"step {step.id!r} consumes its own output {source[1]!r}"
                    )
                deps[step.id].add(source[0])
    seen: dict[str, int] = {}  # 0 = visiting, 1 = done

    def visit(node: str, trail: list[str]):
        state = seen.get(node)
        if state == 1:
            return
        if state == 0:
            raise CyclicDataflowError(" -> ".join(trail + [node]))
        seen[node] = 0
        for dep in sorted(deps[node]):
            visit(dep, trail + [node])
        seen[node] = 1

    for step in plan.steps:
        visit(step.id, [])


def topological_order(plan: RunPlan) -> list[RunStep]:
    """Steps in dependency order, ties broken by plan order."""
    deps: dict[str, set[str]] = {s.id: set() for s in plan.steps}
    for step in plan.steps:
        for source in _resolved_sources(plan, step):
            if source[0] != WORKFLOW_SCOPE:
                deps[step.id].add(source[0])
    ordered: list[RunStep] = []
    done: set[str] = set()
    pending = list(plan.steps)
    while pending:
        progressed = False
        for step in list(pending):
            if deps[step.id] <= done:
                ordered.append(step)
                done.add(step.id)
                pending.remove(step)
                progressed = True
                break
        if not progressed:  # load_plan rejects cycles; defensive only
            raise CyclicDataflowError(", ".join(s.id for s in pending))
    return ordered


def load_plan(text: str | bytes) -> RunPlan:
    """Parse and validate a plan document."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedPlanError(f"plan is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise MalformedPlanError("plan must be a JSON object")

    name = raw.get("name")
    workflow_id = raw.get("workflowId")
    if not isinstance(name, str) or not name:
        raise MalformedPlanError("plan needs a non-empty 'name'")
    if not isinstance(workflow_id, str) or not workflow_id:
        raise MalformedPlanError("plan needs a non-empty 'workflowId'")

    raw_params = raw.get("params", [])
    raw_steps = raw.get("steps", [])
    raw_connections = raw.get("connections", [])
    if not isinstance(raw_params, list) or not isinstance(raw_steps, list) \
            or not isinstance(raw_connections, list):
        raise MalformedPlanError("'params', 'steps' and 'connections' must be arrays")
    if not raw_steps:
        raise MalformedPlanError("a plan must declare at least one step")

    params = tuple(_param_spec(p, "workflow") for p in raw_params)
    if len({p.id for p in params}) != len(params):
        raise MalformedPlanError("duplicate workflow parameter id")

    steps: list[RunStep] = []
    seen_steps: set[str] = set()
    for raw_step in raw_steps:
        if not isinstance(raw_step, dict):
            raise MalformedPlanError("step entries must be objects")
        step_id = raw_step.get("id")
        tool_id = raw_step.get("toolId")
        command = raw_step.get("command")
        if not isinstance(step_id, str) or not step_id:
            raise MalformedPlanError("step without a string 'id'")
        if "." in step_id:
            raise MalformedPlanError(f"step id {step_id!r} may not contain '.'")
        if step_id in seen_steps:
            raise DuplicateStepIdError(step_id)
        seen_steps.add(step_id)
        if not isinstance(tool_id, str) or not tool_id:
            raise MalformedPlanError(f"step {step_id!r} needs a 'toolId'")
        if not isinstance(command, str) or not command:
            raise MalformedPlanError(f"step {step_id!r} needs a 'command'")
        step_params = tuple(
            _param_spec(p, f"step {step_id}") for p in raw_step.get("params", [])
        )
        if len({p.id for p in step_params}) != len(step_params):
            raise MalformedPlanError(f"duplicate parameter id in step {step_id!r}")
        bindings = raw_step.get("bindings", {})
        if not isinstance(bindings, dict) or not all(
            isinstance(k, str) and isinstance(v, str) for k, v in bindings.items()
        ):
            raise MalformedPlanError(f"step {step_id!r} bindings must map strings to strings")
        step = RunStep(step_id, tool_id, command, step_params, dict(bindings))
        for placeholder in _PLACEHOLDER_RE.findall(command):
            if step.param(placeholder) is None:
                raise UnknownParamError(
                    placeholder, f"placeholder in command of step {step_id!r}"
                )
        steps.append(step)

    # Steps sharing a tool must agree on its parameter interface.
    by_tool: dict[str, tuple[PlanParam, ...]] = {}
    for step in steps:
        known = by_tool.setdefault(step.tool_id, step.params)
        if known != step.params:
            raise MalformedPlanError(
                f"steps sharing tool {step.tool_id!r} declare different parameters"
            )

    plan = RunPlan(
        name=name,
        workflow_id=workflow_id,
        params=params,
        steps=tuple(steps),
        connections=(),
        deterministic_ids=bool(raw.get("deterministicIds", False)),
        env_allowlist=tuple(raw.get("envAllowlist", [])),
        source_text=text,
    )

    # Binding targets are this step's input params; every input must be fed.
    for step in steps:
        bound_targets = set()
        for key, target in step.bindings.items():
            target_param = step.param(target)
            if target_param is None:
                raise UnknownParamError(target, f"binding target in step {step.id!r}")
            if target_param.direction != "in":
                raise MalformedPlanError(
                    f"step {step.id!r} binds {target!r}, which is not an input parameter"
                )
            if target in bound_targets:
                raise MalformedPlanError(
                    f"step {step.id!r} binds input {target!r} twice"
                )
            bound_targets.add(target)
            _resolve_source(plan, key, f"binding of step {step.id!r}")
        for param in step.in_params:
            if param.id not in bound_targets:
                raise MalformedPlanError(
                    f"input parameter {param.id!r} of step {step.id!r} has no binding"
                )

    connections: list[Connection] = []
    owners = {workflow_id} | {s.id for s in steps}
    for raw_conn in raw_connections:
        if not isinstance(raw_conn, dict):
            raise MalformedPlanError("connection entries must be objects")
        source = raw_conn.get("source")
        target = raw_conn.get("target")
        owner = raw_conn.get("owner")
        if not all(isinstance(x, str) and x for x in (source, target, owner)):
            raise MalformedPlanError("connections need string 'source', 'target', 'owner'")
        if owner not in owners:
            raise MalformedPlanError(f"connection owner {owner!r} is not the workflow or a step")
        resolved_source = _resolve_source(plan, source, f"connection owned by {owner!r}")
        resolved_target = _resolve_target(plan, target, f"connection owned by {owner!r}")
        if resolved_source == resolved_target:
            raise MalformedPlanError(
                f"connection owned by {owner!r} links {source!r} to itself"
            )
        connections.append(
            Connection(source, target, owner, resolved_source, resolved_target)
        )

    plan = RunPlan(
        name=plan.name,
        workflow_id=plan.workflow_id,
        params=plan.params,
        steps=plan.steps,
        connections=tuple(connections),
        deterministic_ids=plan.deterministic_ids,
        env_allowlist=plan.env_allowlist,
        source_text=plan.source_text,
    )
    _check_acyclic(plan)
    return plan


# -- execution records -------------------------------------------------------

@dataclass(frozen=True)
class StagedFile:
    """A file or directory staged into the output directory."""

    endpoint: Endpoint
    name: str  # path relative to the output directory
    size: int | None
    is_dir: bool = False
    alternate_name: str | None = None
    encoding_format: str | None = None


@dataclass(frozen=True)
class StagedValue:
    """A non-file input value bound to a workflow parameter."""

    param_id: str
    text: str


@dataclass(frozen=True)
class StepRun:
    step_id: str
    action_id: str
    control_id: str
    start_time: str | None
    end_time: str | None
    exit_status: int | None
    error: str | None
    skipped: bool
    produced: tuple[StagedFile, ...]


@dataclass(frozen=True)
class RunRecord:
    """Everything the crate builder needs to know about one execution."""

    plan_name: str
    workflow_action_id: str
    organize_action_id: str
    start_time: str
    end_time: str
    success: bool
    error: str | None
    agent_name: str
    agent_id: str | None
    staged_inputs: tuple[StagedFile, ...]
    input_values: tuple[StagedValue, ...]
    steps: tuple[StepRun, ...]
    plan_file_size: int


@dataclass(frozen=True)
class AgentDescriptor:
    name: str
    identifier: str | None = None


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


class _IdMinter:
    def __init__(self, deterministic: bool):
        self.deterministic = deterministic
        self._counters: dict[str, int] = {}

    def mint(self, kind: str) -> str:
        if not self.deterministic:
            return f"#{uuid.uuid4()}"
        n = self._counters.get(kind, 0) + 1
        self._counters[kind] = n
        return f"#{kind}-{n}"


class _Stager:
    """Stages files under parameter-derived names, resolving collisions."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.used: set[str] = set()

    def claim(self, preferred: str, scope: str) -> str:
        name = preferred
        if name in self.used:
            name = f"{scope}_{preferred}" if scope else f"in_{preferred}"
        counter = 2
        base = name
        while name in self.used:
            name = f"{base}-{counter}"
            counter += 1
        self.used.add(name)
        return name


def _copy_input(stager: _Stager, param: PlanParam, source: Path) -> StagedFile:
    staged_name = stager.claim(param.id, WORKFLOW_SCOPE)
    destination = stager.out_dir / staged_name
    if param.type == "Collection":
        shutil.copytree(source, destination)
        return StagedFile(
            endpoint=(WORKFLOW_SCOPE, param.id),
            name=staged_name + "/",
            size=None,
            is_dir=True,
            alternate_name=source.name if source.name != staged_name else None,
            encoding_format=param.encoding_format,
        )
    shutil.copy2(source, destination)
    return StagedFile(
        endpoint=(WORKFLOW_SCOPE, param.id),
        name=staged_name,
        size=destination.stat().st_size,
        alternate_name=source.name if source.name != staged_name else None,
        encoding_format=param.encoding_format,
    )


def execute(
    plan: RunPlan,
    inputs: dict[str, str],
    out_dir: str | Path,
    agent: AgentDescriptor | None = None,
    deterministic_ids: bool | None = None,
) -> tuple[CrateDocument, RunRecord]:
    """Run a plan and emit a Provenance Run Crate into ``out_dir``.

    ``inputs`` binds workflow input parameters to file/directory paths or
    literal values. Steps run sequentially in dependency order through the
    platform shell, with environment passthrough disabled except for PATH
    and the plan's allowlist. A failing step skips its dependents and marks
    the workflow action failed; the crate is still written.
    """
    agent = agent or AgentDescriptor(name="anonymous")
    deterministic = plan.deterministic_ids if deterministic_ids is None else deterministic_ids
    minter = _IdMinter(deterministic)

    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutDirNotWritableError(f"{out_dir}: {exc}") from exc
    if not os.access(out_dir, os.W_OK):
        raise OutDirNotWritableError(str(out_dir))

    for param in plan.in_params:
        if param.id not in inputs:
            raise MissingInputError(param.id)
        if param.type == "Integer":
            try:
                int(inputs[param.id])
            except ValueError:
                raise MissingInputError(
                    param.id, f"expected an integer, got {inputs[param.id]!r}"
                ) from None

    workflow_start = _now()

    stager = _Stager(out_dir)
    plan_text = plan.source_text or (json.dumps(_plan_to_json(plan), indent=2) + "\n")
    plan_file_name = Path(plan.workflow_id).name
    stager.used.add(plan_file_name)
    (out_dir / plan_file_name).write_text(plan_text, encoding="utf-8")
    stager.used.add(METADATA_DESCRIPTOR_ID)

    staged_inputs: list[StagedFile] = []
    input_values: list[StagedValue] = []
    staged_by_endpoint: dict[Endpoint, StagedFile] = {}
    literal_by_param: dict[str, str] = {}
    for param in plan.in_params:
        raw = inputs[param.id]
        if param.type in ("File", "Collection"):
            source = Path(raw)
            if not source.exists():
                raise MissingInputError(param.id, f"path {raw!r} does not exist")
            staged = _copy_input(stager, param, source)
            staged_inputs.append(staged)
            staged_by_endpoint[staged.endpoint] = staged
        else:
            input_values.append(StagedValue(param.id, str(raw)))
            literal_by_param[param.id] = str(raw)

    env = {"PATH": os.environ.get("PATH", ""), "LC_ALL": "C"}
    for var in plan.env_allowlist:
        if var in os.environ:
            env[var] = os.environ[var]

    step_runs: list[StepRun] = []
    workflow_action_id = minter.mint("action")
    failed_steps: set[str] = set()
    dead_steps: set[str] = set()
    first_error: str | None = None

    for step in topological_order(plan):
        resolved_bindings = {
            key: _resolve_source(plan, key, "binding") for key in step.bindings
        }
        upstream = {src[0] for src in resolved_bindings.values() if src[0] != WORKFLOW_SCOPE}
        if upstream & (failed_steps | dead_steps):
            dead_steps.add(step.id)
            step_runs.append(
                StepRun(
                    step_id=step.id,
                    action_id="",
                    control_id="",
                    start_time=None,
                    end_time=None,
                    exit_status=None,
                    error=None,
                    skipped=True,
                    produced=(),
                )
            )
            continue

        substitutions: dict[str, str] = {}
        out_names: dict[str, StagedFile] = {}
        for param in step.params:
            if param.direction == "out":
                staged_name = stager.claim(param.id, step.id)
                out_names[param.id] = StagedFile(
                    endpoint=(step.id, param.id),
                    name=staged_name,
                    size=None,
                    encoding_format=param.encoding_format,
                )
                substitutions[param.id] = staged_name
            else:
                source = next(
                    src for key, src in resolved_bindings.items()
                    if step.bindings[key] == param.id
                )
                if source[0] == WORKFLOW_SCOPE and source[1] in literal_by_param:
                    substitutions[param.id] = literal_by_param[source[1]]
                else:
                    substitutions[param.id] = staged_by_endpoint[source].name.rstrip("/")

        command = _PLACEHOLDER_RE.sub(lambda m: substitutions[m.group(1)], step.command_template)

        action_id = minter.mint("action")
        control_id = minter.mint("control")
        start = _now()
        try:
            proc = subprocess.run(
                command,
                shell=True,
                cwd=out_dir,
                env=env,
                capture_output=True,
                text=True,
            )
        except OSError as exc:
            raise StepSpawnFailureError(step.id, str(exc)) from exc
        end = _now()

        error = None
        produced: list[StagedFile] = []
        if proc.returncode != 0:
            stderr_tail = (proc.stderr or "").strip()[-_STDERR_LIMIT:]
            error = f"exit status {proc.returncode}"
            if stderr_tail:
                error += f": {stderr_tail}"
        else:
            for param in step.out_params:
                staged = out_names[param.id]
                path = out_dir / staged.name
                if not path.exists():
                    error = f"declared output {param.id!r} not produced"
                    break
                produced.append(
                    StagedFile(
                        endpoint=staged.endpoint,
                        name=staged.name,
                        size=path.stat().st_size,
                        encoding_format=staged.encoding_format,
                    )
                )

        if error is not None:
            failed_steps.add(step.id)
            first_error = first_error or f"step {step.id!r}: {error}"
            produced = []
        else:
            for staged in produced:
                staged_by_endpoint[staged.endpoint] = staged

        step_runs.append(
            StepRun(
                step_id=step.id,
                action_id=action_id,
                control_id=control_id,
                start_time=start,
                end_time=end,
                exit_status=proc.returncode,
                error=error,
                skipped=False,
                produced=tuple(produced),
            )
        )

    workflow_end = _now()
    success = not failed_steps and not dead_steps
    record = RunRecord(
        plan_name=plan.name,
        workflow_action_id=workflow_action_id,
        organize_action_id=minter.mint("organize"),
        start_time=workflow_start,
        end_time=workflow_end,
        success=success,
        error=first_error,
        agent_name=agent.name,
        agent_id=agent.identifier,
        staged_inputs=tuple(staged_inputs),
        input_values=tuple(input_values),
        steps=tuple(step_runs),
        plan_file_size=len(plan_text.encode("utf-8")),
    )

    doc = build_crate(record, plan)
    (out_dir / METADATA_DESCRIPTOR_ID).write_text(serialize_crate(doc), encoding="utf-8")
    return (
        CrateDocument(doc.context_refs, doc.entities, source_path=out_dir),
        record,
    )


def _plan_to_json(plan: RunPlan) -> dict:
    return {
        "name": plan.name,
        "workflowId": plan.workflow_id,
        "params": [
            {
                "id": p.id,
                "direction": p.direction,
                "type": p.type,
                **({"encodingFormat": p.encoding_format} if p.encoding_format else {}),
            }
            for p in plan.params
        ],
        "steps": [
            {
                "id": s.id,
                "toolId": s.tool_id,
                "command": s.command_template,
                "params": [
                    {
                        "id": p.id,
                        "direction": p.direction,
                        "type": p.type,
                        **({"encodingFormat": p.encoding_format} if p.encoding_format else {}),
                    }
                    for p in s.params
                ],
                "bindings": s.bindings,
            }
            for s in plan.steps
        ],
        "connections": [
            {"source": c.source, "target": c.target, "owner": c.owner}
            for c in plan.connections
        ],
    }


# -- crate assembly ----------------------------------------------------------

_COMPLETED = Reference(SCHEMA_ORG + "CompletedActionStatus")
_FAILED = Reference(SCHEMA_ORG + "FailedActionStatus")

RO_CRATE_CONTEXT = "https://w3id.org/ro/crate/1.1/context"


def _tool_entity_id(tool_id: str) -> str:
    return f"#{tool_id}"


def _workflow_param_id(plan: RunPlan, param_id: str) -> str:
    return f"{plan.workflow_id}#{param_id}"


def _tool_param_id(tool_id: str, param_id: str) -> str:
    return f"#{tool_id}/{param_id}"


def _step_entity_id(plan: RunPlan, step_id: str) -> str:
    return f"{plan.workflow_id}#{step_id}"


def _endpoint_param_entity(plan: RunPlan, endpoint: Endpoint) -> str:
    scope, param_id = endpoint
    if scope == WORKFLOW_SCOPE:
        return _workflow_param_id(plan, param_id)
    return _tool_param_id(plan.step(scope).tool_id, param_id)


class _CrateBuilder:
    def __init__(self):
        self.entities: dict[str, Entity] = {}

    def add(self, entity_id: str, types: list[str], properties: dict[str, object]):
        props: dict[str, list[Value]] = {}
        for term, raw in properties.items():
            if raw is None:
                continue
            values = raw if isinstance(raw, list) else [raw]
            if not values:
                continue
            props[term] = list(values)
        self.entities[entity_id] = Entity(entity_id, tuple(types), props)


def _param_realizations(plan: RunPlan, record: RunRecord) -> dict[str, list[str]]:
    """Map each staged file / property value entity to the formal parameters
    it realizes: its own endpoint plus every endpoint wired to it."""
    wired: dict[Endpoint, list[Endpoint]] = {}
    for step in plan.steps:
        for key, target in step.bindings.items():
            source = _resolve_source(plan, key, "binding")
            wired.setdefault(source, []).append((step.id, target))
    for conn in plan.connections:
        wired.setdefault(conn.resolved_source, [])
        if conn.resolved_target not in wired[conn.resolved_source]:
            wired[conn.resolved_source].append(conn.resolved_target)

    realizations: dict[str, list[str]] = {}

    def links_for(endpoint: Endpoint) -> list[str]:
        seen: list[Endpoint] = [endpoint]
        for other in wired.get(endpoint, []):
            if other not in seen:
                seen.append(other)
        return [_endpoint_param_entity(plan, e) for e in seen]

    for staged in record.staged_inputs:
        realizations[staged.name] = links_for(staged.endpoint)
    for value in record.input_values:
        realizations[f"#pv-{value.param_id}"] = links_for((WORKFLOW_SCOPE, value.param_id))
    for step_run in record.steps:
        for staged in step_run.produced:
            realizations[staged.name] = links_for(staged.endpoint)
    return realizations


def build_crate(record: RunRecord, plan: RunPlan) -> CrateDocument:
    """Assemble the Provenance Run Crate for a run; pure in (record, plan)."""
    b = _CrateBuilder()
    realizations = _param_realizations(plan, record)
    executed = [s for s in record.steps if not s.skipped]

    workflow_refs = [Reference(plan.workflow_id)]
    file_entity_ids: list[str] = [s.name for s in record.staged_inputs]
    for step_run in executed:
        file_entity_ids.extend(s.name for s in step_run.produced)

    b.add(
        METADATA_DESCRIPTOR_ID,
        ["CreativeWork"],
        {
            "conformsTo": Reference(RO_CRATE_SPEC_IRI),
            "about": Reference("./"),
        },
    )
    b.add(
        "./",
        ["Dataset"],
        {
            "name": plan.name,
            "conformsTo": [
                Reference(PROCESS_PROFILE.iri),
                Reference(WORKFLOW_PROFILE.iri),
                Reference(PROVENANCE_PROFILE.iri),
                Reference(WORKFLOW_RO_CRATE_PROFILE_IRI),
            ],
            "mainEntity": workflow_refs[0],
            "hasPart": workflow_refs + [Reference(i) for i in file_entity_ids],
        },
    )

    # Prospective side: workflow, parameters, tools, steps, connections.
    tool_ids: list[str] = []
    for step in plan.steps:
        if step.tool_id not in tool_ids:
            tool_ids.append(step.tool_id)

    workflow_connections = [
        f"#connection-{i + 1}"
        for i, c in enumerate(plan.connections)
        if c.owner == plan.workflow_id
    ]
    b.add(
        plan.workflow_id,
        ["File", "SoftwareSourceCode", "ComputationalWorkflow"],
        {
            "name": plan.name,
            "contentSize": str(record.plan_file_size),
            "programmingLanguage": Reference("#plan-language"),
            "input": [Reference(_workflow_param_id(plan, p.id)) for p in plan.in_params],
            "output": [Reference(_workflow_param_id(plan, p.id)) for p in plan.out_params],
            "step": [Reference(_step_entity_id(plan, s.id)) for s in plan.steps],
            "hasPart": [Reference(_tool_entity_id(t)) for t in tool_ids],
            "connection": [Reference(c) for c in workflow_connections],
        },
    )
    b.add("#plan-language", ["ComputerLanguage"], {"name": PLAN_LANGUAGE_NAME})

    for param in plan.params:
        b.add(
            _workflow_param_id(plan, param.id),
            ["FormalParameter"],
            {
                "name": param.id,
                "additionalType": param.type,
                "encodingFormat": param.encoding_format,
                "valueRequired": "True" if param.direction == "in" else None,
            },
        )

    for tool_id in tool_ids:
        step = next(s for s in plan.steps if s.tool_id == tool_id)
        b.add(
            _tool_entity_id(tool_id),
            ["SoftwareApplication"],
            {
                "name": tool_id,
                "input": [Reference(_tool_param_id(tool_id, p.id)) for p in step.in_params],
                "output": [Reference(_tool_param_id(tool_id, p.id)) for p in step.out_params],
            },
        )
        for param in step.params:
            b.add(
                _tool_param_id(tool_id, param.id),
                ["FormalParameter"],
                {
                    "name": param.id,
                    "additionalType": param.type,
                    "encodingFormat": param.encoding_format,
                    "valueRequired": "True" if param.direction == "in" else None,
                },
            )

    for step in plan.steps:
        step_connections = [
            f"#connection-{i + 1}"
            for i, c in enumerate(plan.connections)
            if c.owner == step.id
        ]
        b.add(
            _step_entity_id(plan, step.id),
            ["HowToStep"],
            {
                "name": step.id,
                "workExample": Reference(_tool_entity_id(step.tool_id)),
                "connection": [Reference(c) for c in step_connections],
            },
        )

    for i, conn in enumerate(plan.connections):
        b.add(
            f"#connection-{i + 1}",
            ["ParameterConnection"],
            {
                "sourceParameter": Reference(_endpoint_param_entity(plan, conn.resolved_source)),
                "targetParameter": Reference(_endpoint_param_entity(plan, conn.resolved_target)),
            },
        )

    # Data entities.
    def add_staged(staged: StagedFile):
        entity_id = staged.name
        types = ["Dataset"] if staged.is_dir else ["File"]
        b.add(
            entity_id,
            types,
            {
                "contentSize": str(staged.size) if staged.size is not None else None,
                "encodingFormat": staged.encoding_format,
                "alternateName": staged.alternate_name,
                "exampleOfWork": [Reference(r) for r in realizations[entity_id]],
            },
        )

    for staged in record.staged_inputs:
        add_staged(staged)
    for value in record.input_values:
        b.add(
            f"#pv-{value.param_id}",
            ["PropertyValue"],
            {
                "name": value.param_id,
                "value": value.text,
                "exampleOfWork": [Reference(r) for r in realizations[f"#pv-{value.param_id}"]],
            },
        )
    for step_run in executed:
        for staged in step_run.produced:
            add_staged(staged)

    # Retrospective side: one action per execution, controls, orchestration.
    produced_by_endpoint: dict[Endpoint, str] = {}
    for step_run in executed:
        for staged in step_run.produced:
            produced_by_endpoint[staged.endpoint] = staged.name

    def workflow_input_entity(param: PlanParam) -> str | None:
        for staged in record.staged_inputs:
            if staged.endpoint == (WORKFLOW_SCOPE, param.id):
                return staged.name
        for value in record.input_values:
            if value.param_id == param.id:
                return f"#pv-{value.param_id}"
        return None

    def workflow_output_entity(param: PlanParam) -> str | None:
        for conn in plan.connections:
            if conn.resolved_target == (WORKFLOW_SCOPE, param.id):
                return produced_by_endpoint.get(conn.resolved_source)
        return None

    wf_objects = [workflow_input_entity(p) for p in plan.in_params]
    wf_results = [workflow_output_entity(p) for p in plan.out_params]
    b.add(
        record.workflow_action_id,
        ["CreateAction"],
        {
            "name": f"Run of {plan.name}",
            "instrument": Reference(plan.workflow_id),
            "agent": Reference(record.agent_id or "#agent"),
            "startTime": record.start_time,
            "endTime": record.end_time,
            "object": [Reference(e) for e in wf_objects if e is not None],
            "result": [Reference(e) for e in wf_results if e is not None],
            "actionStatus": _COMPLETED if record.success else _FAILED,
            "error": record.error if not record.success else None,
        },
    )

    for step_run in executed:
        step = plan.step(step_run.step_id)
        objects = []
        for param in step.in_params:
            source = _resolve_source(plan, next(
                key for key, target in step.bindings.items() if target == param.id
            ), "binding")
            if source[0] == WORKFLOW_SCOPE:
                entity = workflow_input_entity(
                    next(p for p in plan.in_params if p.id == source[1])
                )
            else:
                entity = produced_by_endpoint.get(source)
            if entity is not None:
                objects.append(entity)
        b.add(
            step_run.action_id,
            ["CreateAction"],
            {
                "name": f"Run of step {step.id}",
                "instrument": Reference(_tool_entity_id(step.tool_id)),
                "startTime": step_run.start_time,
                "endTime": step_run.end_time,
                "object": [Reference(e) for e in objects],
                "result": [Reference(s.name) for s in step_run.produced],
                "actionStatus": _COMPLETED if step_run.error is None else _FAILED,
                "error": step_run.error,
            },
        )
        b.add(
            step_run.control_id,
            ["ControlAction"],
            {
                "name": f"Orchestration of step {step.id}",
                "instrument": Reference(_step_entity_id(plan, step.id)),
                "object": Reference(step_run.action_id),
            },
        )

    b.add(
        record.organize_action_id,
        ["OrganizeAction"],
        {
            "name": f"Run of {ENGINE_NAME}",
            "instrument": Reference("#engine"),
            "object": [Reference(s.control_id) for s in executed]
            + [Reference(plan.workflow_id)],
            "result": Reference(record.workflow_action_id),
        },
    )
    b.add(
        "#engine",
        ["SoftwareApplication"],
        {"name": ENGINE_NAME, "description": f"{ENGINE_NAME} {__version__}"},
    )
    if record.agent_id is None:
        b.add("#agent", ["Person"], {"name": record.agent_name})
    else:
        b.add(record.agent_id, ["Person"], {"name": record.agent_name})

    return CrateDocument(context_refs=(RO_CRATE_CONTEXT,), entities=b.entities)
