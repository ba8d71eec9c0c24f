"""Export of retrospective provenance as W3C PROV statements (PROV-N text).

Executions become activities, their data become entities, agents stay
agents, and the instrument becomes the plan of a qualified association.
Step-control and parameter-connection structures have no PROV counterpart
and are not exported.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from urllib.parse import quote

from .errors import DanglingReferenceError
from .model import CrateDocument, Entity, Reference, is_absolute_iri, parse_timestamp
from .terms import PROV, SCHEMA_ORG, WFRUN, XSD


class StatementKind(Enum):
    ENTITY = "entity"
    AGENT = "agent"
    ACTIVITY = "activity"
    ASSOCIATION = "wasAssociatedWith"
    USED = "used"
    GENERATED = "wasGeneratedBy"


#: Rendering order of statement groups within a document.
_KIND_ORDER = (
    StatementKind.ENTITY,
    StatementKind.AGENT,
    StatementKind.ACTIVITY,
    StatementKind.ASSOCIATION,
    StatementKind.USED,
    StatementKind.GENERATED,
)

_AGENT_TYPES = {
    "Person": "prov:Person",
    "Organization": "prov:Organization",
    "SoftwareApplication": "prov:SoftwareAgent",
}

_PREFIXES = {
    "prov": PROV,
    "s": SCHEMA_ORG,
    "wfrun": WFRUN,
    "xsd": XSD,
    "crate": "urn:crate:",
}


@dataclass(frozen=True)
class ProvStatement:
    kind: StatementKind
    subject: str
    object_id: str | None = None
    plan_id: str | None = None
    attributes: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ProvDocument:
    statements: tuple[ProvStatement, ...]
    prefixes: dict[str, str] = field(default_factory=lambda: dict(_PREFIXES))


def _qname(entity_id: str) -> str:
    """Mint a crate-scoped qualified name by percent-encoding the id.

    PROV-N local names cannot carry arbitrary characters; '.' and '~' are
    escaped on top of the URL rules so any id round-trips safely.
    """
    encoded = quote(entity_id, safe="")
    encoded = encoded.replace(".", "%2E").replace("~", "%7E")
    if encoded.startswith("-"):
        encoded = "%2D" + encoded[1:]
    return f"crate:{encoded}"


def _resolve_member(doc: CrateDocument, ref: Reference) -> Entity | None:
    entity = doc.entities.get(ref.id)
    if entity is None and not is_absolute_iri(ref.id):
        raise DanglingReferenceError(ref.id)
    return entity


class _Builder:
    def __init__(self):
        self.entities: dict[str, ProvStatement] = {}
        self.agents: dict[str, ProvStatement] = {}
        self.activities: list[ProvStatement] = []
        self.associations: list[ProvStatement] = []
        self.used: list[ProvStatement] = []
        self.generated: list[ProvStatement] = []

    def declare_entity(self, entity_id: str, as_plan: bool = False):
        known = self.entities.get(entity_id)
        if known is not None and not as_plan:
            return
        attrs = (("prov:type", "'prov:Plan'"),) if as_plan else ()
        if known is not None:
            attrs = attrs or known.attributes
        self.entities[entity_id] = ProvStatement(
            StatementKind.ENTITY, subject=entity_id, attributes=attrs
        )

    def declare_agent(self, entity_id: str, prov_type: str | None):
        if entity_id in self.agents:
            return
        attrs = ((("prov:type", f"'{prov_type}'"),) if prov_type else ())
        self.agents[entity_id] = ProvStatement(
            StatementKind.AGENT, subject=entity_id, attributes=attrs
        )

    def all_statements(self) -> tuple[ProvStatement, ...]:
        return tuple(
            list(self.entities.values())
            + list(self.agents.values())
            + self.activities
            + self.associations
            + self.used
            + self.generated
        )


def _activity_attributes(action: Entity) -> tuple[tuple[str, str], ...]:
    attrs: list[tuple[str, str]] = []
    source_type = "s:OrganizeAction" if action.has_type("OrganizeAction") else "s:CreateAction"
    attrs.append(("prov:type", f"'{source_type}'"))
    for term, prov_term in (("startTime", "prov:startedAtTime"), ("endTime", "prov:endedAtTime")):
        raw = action.first_text(term)
        if raw is not None and parse_timestamp(raw) is not None:
            attrs.append((prov_term, f'"{raw}" %% xsd:dateTime'))
    return tuple(attrs)


def export_prov(doc: CrateDocument) -> ProvDocument:
    """Map a crate's realized actions onto PROV statements.

    CreateActions and OrganizeActions become activities. For every
    CreateAction, ``object`` members yield ``used``, ``result`` members yield
    ``wasGeneratedBy``, and agent/instrument yield an association whose plan
    is the instrument. Local references that do not resolve raise
    :class:`DanglingReferenceError`.
    """
    b = _Builder()
    actions = [
        e
        for e in doc.entities.values()
        if e.has_type("CreateAction") or e.has_type("OrganizeAction")
    ]

    for action in actions:
        b.activities.append(
            ProvStatement(
                StatementKind.ACTIVITY,
                subject=action.id,
                attributes=_activity_attributes(action),
            )
        )

    for action in actions:
        is_create = action.has_type("CreateAction")

        plan_ids = []
        for ref in action.get("instrument"):
            if not isinstance(ref, Reference):
                continue
            _resolve_member(doc, ref)
            b.declare_entity(ref.id, as_plan=True)
            plan_ids.append(ref.id)

        agent_ids = []
        for ref in action.get("agent"):
            if not isinstance(ref, Reference):
                continue
            agent = _resolve_member(doc, ref)
            prov_type = None
            if agent is not None:
                for type_name, mapped in _AGENT_TYPES.items():
                    if agent.has_type(type_name):
                        prov_type = mapped
                        break
            b.declare_agent(ref.id, prov_type)
            agent_ids.append(ref.id)

        plan = plan_ids[0] if plan_ids else None
        if agent_ids:
            for agent_id in agent_ids:
                b.associations.append(
                    ProvStatement(
                        StatementKind.ASSOCIATION,
                        subject=action.id,
                        object_id=agent_id,
                        plan_id=plan,
                    )
                )
        elif plan is not None:
            b.associations.append(
                ProvStatement(
                    StatementKind.ASSOCIATION,
                    subject=action.id,
                    object_id=None,
                    plan_id=plan,
                )
            )

        if not is_create:
            # Step-control members of an orchestration are activities, not
            # entities; they stay out of used/wasGeneratedBy.
            continue

        for ref in action.get("object"):
            if not isinstance(ref, Reference):
                continue
            _resolve_member(doc, ref)
            b.declare_entity(ref.id)
            b.used.append(
                ProvStatement(StatementKind.USED, subject=action.id, object_id=ref.id)
            )
        for ref in action.get("result"):
            if not isinstance(ref, Reference):
                continue
            _resolve_member(doc, ref)
            b.declare_entity(ref.id)
            b.generated.append(
                ProvStatement(StatementKind.GENERATED, subject=ref.id, object_id=action.id)
            )

    return ProvDocument(statements=b.all_statements())


def _render_attributes(attrs: tuple[tuple[str, str], ...]) -> str:
    if not attrs:
        return ""
    inner = ", ".join(f"{key} = {value}" for key, value in attrs)
    return f", [{inner}]"


def _render_statement(st: ProvStatement) -> str:
    subj = _qname(st.subject)
    if st.kind is StatementKind.ENTITY:
        return f"entity({subj}{_render_attributes(st.attributes)})"
    if st.kind is StatementKind.AGENT:
        return f"agent({subj}{_render_attributes(st.attributes)})"
    if st.kind is StatementKind.ACTIVITY:
        return f"activity({subj}, -, -{_render_attributes(st.attributes)})"
    if st.kind is StatementKind.ASSOCIATION:
        agent = _qname(st.object_id) if st.object_id else "-"
        plan = _qname(st.plan_id) if st.plan_id else "-"
        return f"wasAssociatedWith({subj}, {agent}, {plan})"
    if st.kind is StatementKind.USED:
        return f"used({subj}, {_qname(st.object_id)}, -)"
    return f"wasGeneratedBy({subj}, {_qname(st.object_id)}, -)"


def render_provn(pd: ProvDocument) -> str:
    """Serialize as PROV-N, deterministically grouped and ordered."""
    lines = ["document"]
    for prefix, iri in pd.prefixes.items():
        lines.append(f"  prefix {prefix} <{iri}>")
    for kind in _KIND_ORDER:
        for st in pd.statements:
            if st.kind is kind:
                lines.append(f"  {_render_statement(st)}")
    lines.append("endDocument")
    return "\n".join(lines) + "\n"
