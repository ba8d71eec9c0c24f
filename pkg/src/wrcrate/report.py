"""Human-readable execution reports and resolved action views.

One view is produced per execution action, with inputs and outputs resolved
against the instrument's declared formal parameters via ``exampleOfWork``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .model import CrateDocument, Entity, Reference, parse_timestamp, resolve


class ActionKind(Enum):
    WORKFLOW_RUN = "workflow-run"
    TOOL_RUN = "tool-run"
    ORCHESTRATION = "orchestration"


@dataclass(frozen=True)
class ResolvedParam:
    """One input or output of an action as shown in the report."""

    display: str
    value_id: str
    param_id: str | None


@dataclass(frozen=True)
class ActionView:
    id: str
    kind: ActionKind
    step_id: str | None
    instrument_id: str | None
    instrument_name: str | None
    instrument_types: tuple[str, ...]
    start_time: str | None
    end_time: str | None
    status: str | None
    inputs: tuple[ResolvedParam, ...]
    outputs: tuple[ResolvedParam, ...]


def _display_name(entity: Entity) -> str:
    name = entity.first_text("name")
    if name:
        return name
    return entity.id.rstrip("/").rsplit("/", 1)[-1]


def _value_display(doc: CrateDocument, value) -> tuple[str, str]:
    """Return (display, value id) for one object/result member."""
    if not isinstance(value, Reference):
        return str(value), str(value)
    entity = resolve(doc, value)
    if entity is None:
        return value.id, value.id
    if entity.has_type("PropertyValue"):
        literal = entity.first("value")
        if literal is not None:
            return str(literal), entity.id
    return entity.id, entity.id


def _resolve_members(
    doc: CrateDocument, action: Entity, term: str, param_order: list[str]
) -> tuple[ResolvedParam, ...]:
    param_rank = {p: i for i, p in enumerate(param_order)}
    mapped: list[tuple[int, ResolvedParam]] = []
    unmapped: list[ResolvedParam] = []
    for value in action.get(term):
        display, value_id = _value_display(doc, value)
        param_id = None
        if isinstance(value, Reference):
            entity = resolve(doc, value)
            if entity is not None:
                links = [p for p in entity.refs("exampleOfWork") if p in param_rank]
                if links:
                    param_id = min(links, key=param_rank.__getitem__)
        entry = ResolvedParam(display, value_id, param_id)
        if param_id is not None:
            mapped.append((param_rank[param_id], entry))
        else:
            unmapped.append(entry)
    ordered = [e for _, e in sorted(mapped, key=lambda pair: pair[0])]
    ordered.extend(unmapped)
    return tuple(ordered)


def _step_of(doc: CrateDocument, action_id: str) -> str | None:
    for entity in doc.entities.values():
        if entity.has_type("ControlAction") and action_id in entity.refs("object"):
            instruments = entity.refs("instrument")
            if instruments:
                return instruments[0]
    return None


def _build_view(doc: CrateDocument, action: Entity, kind: ActionKind) -> ActionView:
    instrument_id = None
    instrument_name = None
    instrument_types: tuple[str, ...] = ()
    inputs_order: list[str] = []
    outputs_order: list[str] = []
    instruments = action.refs("instrument")
    if instruments:
        instrument_id = instruments[0]
        instrument = resolve(doc, instrument_id)
        if instrument is not None:
            instrument_name = _display_name(instrument)
            instrument_types = instrument.types
            inputs_order = instrument.refs("input")
            outputs_order = instrument.refs("output")
            if kind is ActionKind.TOOL_RUN and instrument.has_type("ComputationalWorkflow"):
                kind = ActionKind.WORKFLOW_RUN
        else:
            instrument_name = instrument_id.rstrip("/").rsplit("/", 1)[-1]

    start = action.first_text("startTime")
    end = action.first_text("endTime")
    status = action.first("actionStatus")
    if isinstance(status, Reference):
        status = status.id
    elif status is not None:
        status = str(status)

    return ActionView(
        id=action.id,
        kind=kind,
        step_id=_step_of(doc, action.id),
        instrument_id=instrument_id,
        instrument_name=instrument_name,
        instrument_types=instrument_types,
        start_time=start,
        end_time=end,
        status=status,
        inputs=_resolve_members(doc, action, "object", inputs_order),
        outputs=_resolve_members(doc, action, "result", outputs_order),
    )


def _view_sort_key(view: ActionView):
    stamp = parse_timestamp(view.start_time) if view.start_time else None
    if stamp is None:
        return (1, "", view.id)
    return (0, stamp.isoformat(), view.id)


def action_views(
    doc: CrateDocument, include_orchestration: bool = False
) -> list[ActionView]:
    """Resolved views of all execution actions, ordered by start time.

    Actions without a start time sort last, tied views by id. Orchestration
    (OrganizeAction) views are excluded unless requested.
    """
    views = [
        _build_view(doc, e, ActionKind.TOOL_RUN)
        for e in doc.entities.values()
        if e.has_type("CreateAction")
    ]
    if include_orchestration:
        views.extend(
            _build_view(doc, e, ActionKind.ORCHESTRATION)
            for e in doc.entities.values()
            if e.has_type("OrganizeAction")
        )
    views.sort(key=_view_sort_key)
    return views


def _render_entry(entry: ResolvedParam) -> str:
    if entry.param_id is not None:
        return f"    {entry.display} <- {entry.param_id}"
    return f"    {entry.display}"


def render_report(views: list[ActionView]) -> str:
    """Render views as the line-oriented execution report."""
    lines: list[str] = []
    for view in views:
        lines.append(f"action: {view.id}")
        if view.step_id:
            lines.append(f"  step: {view.step_id}")
        if view.instrument_id:
            lines.append(f"  instrument: {view.instrument_name} ({list(view.instrument_types)!r})")
        if view.start_time:
            lines.append(f"  started: {view.start_time}")
        if view.end_time:
            lines.append(f"  ended: {view.end_time}")
        if view.inputs:
            lines.append("  inputs:")
            lines.extend(_render_entry(e) for e in view.inputs)
        if view.outputs:
            lines.append("  outputs:")
            lines.extend(_render_entry(e) for e in view.outputs)
    return "\n".join(lines) + ("\n" if lines else "")


def views_to_json(views: list[ActionView]) -> str:
    """Machine-readable dump of action views."""
    payload = [
        {
            "id": v.id,
            "kind": v.kind.value,
            "step": v.step_id,
            "instrument": v.instrument_id,
            "instrumentName": v.instrument_name,
            "instrumentTypes": list(v.instrument_types),
            "startTime": v.start_time,
            "endTime": v.end_time,
            "status": v.status,
            "inputs": [
                {"display": e.display, "value": e.value_id, "param": e.param_id}
                for e in v.inputs
            ],
            "outputs": [
                {"display": e.display, "value": e.value_id, "param": e.param_id}
                for e in v.outputs
            ],
        }
        for v in views
    ]
    return json.dumps(payload, indent=2) + "\n"


def dataflow_graph(doc: CrateDocument) -> list[tuple[str, str, str]]:
    """Implicit dataflow edges: (producing action, entity, consuming action).

    An edge exists for every entity appearing in the ``result`` of one
    CreateAction and the ``object`` of another.
    """
    producers: dict[str, list[str]] = {}
    consumers: dict[str, list[str]] = {}
    for entity in doc.entities.values():
        if not entity.has_type("CreateAction"):
            continue
        for ref in entity.refs("result"):
            producers.setdefault(ref, []).append(entity.id)
        for ref in entity.refs("object"):
            consumers.setdefault(ref, []).append(entity.id)
    edges = {
        (producer, via, consumer)
        for via, produced_by in producers.items()
        for producer in produced_by
        for consumer in consumers.get(via, [])
        if producer != consumer
    }
    return sorted(edges)


def dataflow_anomalies(doc: CrateDocument) -> list[str]:
    """Report-style warnings for edges where the producer ends after the
    consumer starts; never an error."""
    anomalies = []
    for producer_id, via, consumer_id in dataflow_graph(doc):
        producer = doc.entities[producer_id]
        consumer = doc.entities[consumer_id]
        end = parse_timestamp(producer.first_text("endTime") or "")
        start = parse_timestamp(consumer.first_text("startTime") or "")
        if end is not None and start is not None and end > start:
            anomalies.append(
                f"dataflow anomaly: {producer_id} ends after {consumer_id} starts "
                f"(via {via})"
            )
    return anomalies
