"""Entity-graph data model and crate metadata parsing/serialization.

A crate metadata file is a flattened JSON-LD document: a top-level
``@context`` plus a ``@graph`` array of entity objects keyed by ``@id``.
Parsing normalizes every entity into an id, an ordered set of type names
and a property multimap whose values are literals or :class:`Reference`
objects. Documents are treated as immutable once parsed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Iterator, Union
from urllib.parse import urlparse

from .errors import (
    DuplicateEntityIdError,
    EntityWithoutIdError,
    MalformedJsonError,
    MissingContextError,
    MissingGraphError,
    MissingMetadataDescriptorError,
    MissingRootEntityError,
    NestedEntityError,
)
from .terms import (
    METADATA_DESCRIPTOR_ID,
    ProfileId,
    canonical_type,
    profile_for_iri,
)


@dataclass(frozen=True)
class Reference:
    """A graph reference, parsed from a ``{"@id": ...}`` object."""

    id: str


#: A property value: text, integer, decimal or boolean literal, or Reference.
Value = Union[str, int, float, bool, Reference]


@dataclass(frozen=True)
class Entity:
    """One node of the flattened graph.

    ``types`` preserves document order (deduplicated); set semantics are
    provided by :meth:`has_type`, which also honors the File/MediaObject
    alias. ``properties`` maps term names to ordered value lists and never
    contains ``@id`` or ``@type``.
    """

    id: str
    types: tuple[str, ...] = ()
    properties: dict[str, list[Value]] = field(default_factory=dict)

    def has_type(self, name: str) -> bool:
        want = canonical_type(name)
        return any(canonical_type(t) == want for t in self.types)

    def get(self, term: str) -> list[Value]:
        return self.properties.get(term, [])

    def first(self, term: str) -> Value | None:
        values = self.properties.get(term)
        return values[0] if values else None

    def refs(self, term: str) -> list[str]:
        """Ids of all Reference values of ``term``, in order."""
        return [v.id for v in self.get(term) if isinstance(v, Reference)]

    def first_text(self, term: str) -> str | None:
        for v in self.get(term):
            if isinstance(v, str):
                return v
        return None


@dataclass(frozen=True)
class CrateDocument:
    """A parsed crate metadata file: context references plus entity graph."""

    context_refs: tuple[Union[str, dict], ...]
    entities: dict[str, Entity]
    source_path: Path | None = None

    @property
    def descriptor(self) -> Entity:
        return self.entities[METADATA_DESCRIPTOR_ID]

    @property
    def root(self) -> Entity:
        root_id = self.descriptor.refs("about")[0]
        return self.entities[root_id]

    def __iter__(self) -> Iterator[Entity]:
        return iter(self.entities.values())


def _normalize_values(raw: object, entity_id: str, term: str) -> list[Value]:
    items = raw if isinstance(raw, list) else [raw]
    values: list[Value] = []
    for item in items:
        if isinstance(item, dict):
            if set(item.keys()) == {"@id"} and isinstance(item["@id"], str):
                values.append(Reference(item["@id"]))
            else:
                raise NestedEntityError(entity_id, term)
        elif isinstance(item, (bool, int, float, str)):
            values.append(item)
        else:
            # JSON null and nested arrays have no place in the value grammar.
            raise MalformedJsonError(
                f"unsupported value {item!r} in property {term!r} of {entity_id!r}"
            )
    return values


def _parse_entity(member: dict, index: int) -> Entity:
    entity_id = member.get("@id")
    if not isinstance(entity_id, str):
        raise EntityWithoutIdError(index)

    raw_types = member.get("@type", [])
    if isinstance(raw_types, str):
        raw_types = [raw_types]
    if not isinstance(raw_types, list) or not all(isinstance(t, str) for t in raw_types):
        raise MalformedJsonError(f"invalid '@type' on entity {entity_id!r}")
    types = tuple(dict.fromkeys(raw_types))

    properties: dict[str, list[Value]] = {}
    for term, raw in member.items():
        if term in ("@id", "@type"):
            continue
        properties[term] = _normalize_values(raw, entity_id, term)
    return Entity(id=entity_id, types=types, properties=properties)


def parse_crate(text: str | bytes, source_path: Path | None = None) -> CrateDocument:
    """Parse the UTF-8 text of a metadata file into a :class:`CrateDocument`.

    The document must carry a top-level ``@context`` and a flattened
    ``@graph`` containing the metadata descriptor, whose ``about`` points at
    the root Dataset entity.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedJsonError(f"not valid UTF-8: {exc}") from exc
    try:
        top = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedJsonError(f"not valid JSON: {exc}") from exc
    if not isinstance(top, dict):
        raise MalformedJsonError("top-level JSON value must be an object")

    if "@context" not in top:
        raise MissingContextError("document has no '@context'")
    raw_context = top["@context"]
    context_refs = tuple(raw_context) if isinstance(raw_context, list) else (raw_context,)

    if "@graph" not in top:
        raise MissingGraphError("document has no '@graph'")
    graph = top["@graph"]
    if not isinstance(graph, list):
        raise MissingGraphError("'@graph' must be an array")

    entities: dict[str, Entity] = {}
    for index, member in enumerate(graph):
        if not isinstance(member, dict):
            raise EntityWithoutIdError(index)
        entity = _parse_entity(member, index)
        if entity.id in entities:
            raise DuplicateEntityIdError(entity.id)
        entities[entity.id] = entity

    descriptor = entities.get(METADATA_DESCRIPTOR_ID)
    if descriptor is None:
        raise MissingMetadataDescriptorError(
            f"no {METADATA_DESCRIPTOR_ID!r} entity in graph"
        )
    about = descriptor.refs("about")
    if len(about) != 1:
        raise MissingRootEntityError(
            "metadata descriptor must reference exactly one root via 'about', "
            f"found {len(about)}"
        )
    root = entities.get(about[0])
    if root is None:
        raise MissingRootEntityError(f"root entity {about[0]!r} not in graph")
    if not root.has_type("Dataset"):
        raise MissingRootEntityError(
            f"root entity {root.id!r} is not typed 'Dataset'"
        )

    return CrateDocument(
        context_refs=context_refs, entities=entities, source_path=source_path
    )


def _unwrap(values: list) -> object:
    return values[0] if len(values) == 1 else values


def _entity_to_json(entity: Entity) -> dict:
    out: dict = {"@id": entity.id}
    if entity.types:
        out["@type"] = _unwrap(list(entity.types))
    for term, values in entity.properties.items():
        encoded = [{"@id": v.id} if isinstance(v, Reference) else v for v in values]
        out[term] = _unwrap(encoded)
    return out


def serialize_crate(doc: CrateDocument) -> str:
    """Serialize a document back to deterministic metadata-file text.

    The descriptor is written first and the root second; remaining entities
    keep insertion order. Single-element type sets and value lists are
    written in scalar form.
    """
    context = _unwrap(list(doc.context_refs))
    descriptor = doc.descriptor
    root = doc.root
    ordered = [descriptor, root]
    ordered.extend(
        e for e in doc.entities.values() if e.id not in (descriptor.id, root.id)
    )
    top = {"@context": context, "@graph": [_entity_to_json(e) for e in ordered]}
    return json.dumps(top, indent=2, ensure_ascii=False) + "\n"


def resolve(doc: CrateDocument, ref: Reference | str) -> Entity | None:
    """Return the entity a reference points at, or None when not in-graph."""
    ref_id = ref.id if isinstance(ref, Reference) else ref
    return doc.entities.get(ref_id)


def load_crate(crate_dir: str | Path) -> CrateDocument:
    """Read and parse ``ro-crate-metadata.json`` from a crate root directory."""
    crate_dir = Path(crate_dir)
    metadata = crate_dir / METADATA_DESCRIPTOR_ID
    return parse_crate(metadata.read_text(encoding="utf-8"), source_path=crate_dir)


@dataclass(frozen=True)
class ProfileDeclaration:
    """One ``conformsTo`` match, with the location where it was found."""

    profile: ProfileId
    declared_iri: str
    location: str  # "root" or "descriptor"
    version_mismatch: bool


def profile_declarations(doc: CrateDocument) -> list[ProfileDeclaration]:
    """All profile declarations found on the root entity or the descriptor."""
    declarations = []
    for location, entity in (("root", doc.root), ("descriptor", doc.descriptor)):
        for iri in entity.refs("conformsTo"):
            match = profile_for_iri(iri)
            if match is not None:
                profile, mismatch = match
                declarations.append(
                    ProfileDeclaration(profile, iri, location, mismatch)
                )
    return declarations


def declared_profiles(doc: CrateDocument) -> set[ProfileId]:
    """The set of run profiles the document declares conformance to."""
    return {d.profile for d in profile_declarations(doc)}


def is_absolute_iri(ref_id: str) -> bool:
    """True for references with an IRI scheme; local ids (paths, fragments)
    are everything else."""
    try:
        return bool(urlparse(ref_id).scheme)
    except ValueError:
        return False


def parse_timestamp(text: str) -> datetime | None:
    """Parse an ISO 8601 timestamp carrying an explicit UTC offset.

    Returns None for anything malformed or naive; cross-system comparability
    requires the offset.
    """
    if not isinstance(text, str):
        return None
    candidate = text.strip()
    if candidate.endswith("Z"):
        candidate = candidate[:-1] + "+00:00"
    try:
        stamp = datetime.fromisoformat(candidate)
    except ValueError:
        return None
    if stamp.tzinfo is None:
        return None
    return stamp
