"""Core model: parsing, serialization, resolution, profile discovery."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wrcrate.errors import (
    DuplicateEntityIdError,
    EntityWithoutIdError,
    MalformedJsonError,
    MissingContextError,
    MissingGraphError,
    MissingMetadataDescriptorError,
    MissingRootEntityError,
    NestedEntityError,
)
from wrcrate.model import (
    Reference,
    declared_profiles,
    parse_crate,
    parse_timestamp,
    profile_declarations,
    resolve,
    serialize_crate,
)
from wrcrate.terms import ProfileKind

from conftest import crate_json, minimal_process_dict, parse_dict


def doc_shape(doc):
    """Comparable structure for graph isomorphism: ids, type sets, properties."""
    return {
        e.id: (frozenset(e.types), {t: tuple(v) for t, v in e.properties.items()})
        for e in doc.entities.values()
    }


class TestParse:
    def test_snippet_entities(self, snippet_doc):
        assert len(snippet_doc.entities) == 4
        tsv = snippet_doc.entities["final-annotations.tsv"]
        assert tsv.first("contentSize") == "14784"
        assert tsv.get("exampleOfWork") == [Reference("#annotations")]
        param = snippet_doc.entities["#annotations"]
        assert param.first("encodingFormat") == "text/tab-separated-values"
        assert param.first("valueRequired") == "True"

    def test_empty_graph_is_missing_descriptor(self):
        with pytest.raises(MissingMetadataDescriptorError):
            parse_dict(crate_json())

    def test_duplicate_id(self):
        data = crate_json(
            {"@id": "ro-crate-metadata.json", "about": {"@id": "./"}},
            {"@id": "./", "@type": "Dataset"},
            {"@id": "#x", "@type": "Thing"},
            {"@id": "#x", "@type": "Thing"},
        )
        with pytest.raises(DuplicateEntityIdError) as exc:
            parse_dict(data)
        assert exc.value.entity_id == "#x"

    def test_entity_without_id(self):
        data = crate_json(
            {"@id": "ro-crate-metadata.json", "about": {"@id": "./"}},
            {"@id": "./", "@type": "Dataset"},
            {"@type": "Thing"},
        )
        with pytest.raises(EntityWithoutIdError) as exc:
            parse_dict(data)
        assert exc.value.index == 2

    def test_missing_context(self):
        with pytest.raises(MissingContextError):
            parse_crate(json.dumps({"@graph": []}))

    def test_missing_graph(self):
        with pytest.raises(MissingGraphError):
            parse_crate(json.dumps({"@context": "ctx"}))

    def test_malformed_json(self):
        with pytest.raises(MalformedJsonError):
            parse_crate("{not json")

    def test_nested_entity_rejected(self):
        data = minimal_process_dict()
        data["@graph"][2]["object"] = {"@id": "input.txt", "name": "sneaky inline"}
        with pytest.raises(NestedEntityError):
            parse_dict(data)

    def test_null_value_rejected(self):
        data = minimal_process_dict()
        data["@graph"][2]["description"] = None
        with pytest.raises(MalformedJsonError):
            parse_dict(data)

    def test_dangling_root(self):
        data = crate_json(
            {"@id": "ro-crate-metadata.json", "about": {"@id": "./"}},
            {"@id": "#other", "@type": "Dataset"},
        )
        with pytest.raises(MissingRootEntityError):
            parse_dict(data)

    def test_root_must_be_dataset(self):
        data = crate_json(
            {"@id": "ro-crate-metadata.json", "about": {"@id": "./"}},
            {"@id": "./", "@type": "CreativeWork"},
        )
        with pytest.raises(MissingRootEntityError):
            parse_dict(data)

    def test_single_type_normalized_to_set(self):
        doc = parse_dict(minimal_process_dict())
        assert doc.entities["#tool"].types == ("SoftwareApplication",)
        assert doc.entities["#tool"].has_type("SoftwareApplication")

    def test_file_alias(self):
        doc = parse_dict(minimal_process_dict())
        assert doc.entities["input.txt"].has_type("MediaObject")
        assert doc.entities["input.txt"].has_type("File")


class TestSerialize:
    def test_round_trip_isomorphic(self, pathology_doc):
        text = serialize_crate(pathology_doc)
        again = parse_crate(text)
        assert doc_shape(again) == doc_shape(pathology_doc)

    def test_byte_deterministic(self, pathology_doc):
        assert serialize_crate(pathology_doc) == serialize_crate(pathology_doc)
        reparsed = parse_crate(serialize_crate(pathology_doc))
        assert serialize_crate(reparsed) == serialize_crate(pathology_doc)

    def test_scalar_unwrapping(self):
        doc = parse_dict(minimal_process_dict())
        data = json.loads(serialize_crate(doc))
        tool = next(m for m in data["@graph"] if m["@id"] == "#tool")
        assert tool["@type"] == "SoftwareApplication"
        assert tool["name"] == "copier"

    def test_content_size_stays_text(self, snippet_doc):
        data = json.loads(serialize_crate(snippet_doc))
        tsv = next(m for m in data["@graph"] if m["@id"] == "final-annotations.tsv")
        assert tsv["contentSize"] == "14784"

    def test_descriptor_first_root_second(self, training_doc):
        data = json.loads(serialize_crate(training_doc))
        assert data["@graph"][0]["@id"] == "ro-crate-metadata.json"
        assert data["@graph"][1]["@id"] == "./"


class TestResolve:
    def test_fragment(self, snippet_doc):
        entity = resolve(snippet_doc, Reference("#annotations"))
        assert entity is not None and entity.has_type("FormalParameter")

    def test_external_absent(self, snippet_doc):
        assert resolve(snippet_doc, Reference("https://example.org/elsewhere")) is None

    def test_root_lookup(self, snippet_doc):
        entity = resolve(snippet_doc, Reference("./"))
        assert entity is snippet_doc.root


class TestProfiles:
    def test_provenance_declaration(self, pathology_doc):
        kinds = {p.kind for p in declared_profiles(pathology_doc)}
        assert kinds == {ProfileKind.PROVENANCE}

    def test_no_declaration(self, snippet_doc):
        assert declared_profiles(snippet_doc) == set()

    def test_process_declaration(self, training_doc):
        kinds = {p.kind for p in declared_profiles(training_doc)}
        assert kinds == {ProfileKind.PROCESS}

    def test_version_mismatch_flag(self):
        data = minimal_process_dict()
        data["@graph"][1]["conformsTo"] = {"@id": "https://w3id.org/ro/wfrun/process/0.4"}
        doc = parse_dict(data)
        declarations = profile_declarations(doc)
        assert len(declarations) == 1
        assert declarations[0].version_mismatch
        assert declarations[0].profile.kind is ProfileKind.PROCESS

    def test_declaration_location_reported(self):
        data = minimal_process_dict()
        data["@graph"][1].pop("conformsTo")
        data["@graph"][0]["conformsTo"] = [
            {"@id": "https://w3id.org/ro/crate/1.1"},
            {"@id": "https://w3id.org/ro/wfrun/process/0.5"},
        ]
        declarations = profile_declarations(parse_dict(data))
        assert [d.location for d in declarations] == ["descriptor"]


class TestTimestamps:
    @pytest.mark.parametrize(
        "text",
        [
            "2023-05-09T05:10:53.937305+00:00",
            "2023-05-09T05:10:53Z",
            "2024-01-01T00:00:00+02:00",
        ],
    )
    def test_valid(self, text):
        assert parse_timestamp(text) is not None

    @pytest.mark.parametrize(
        "text",
        ["2023-05-09T05:10:53", "yesterday", "2023-13-40T99:00:00+00:00", ""],
    )
    def test_invalid(self, text):
        assert parse_timestamp(text) is None


# -- generated-document properties -------------------------------------------

_id_strategy = st.one_of(
    st.from_regex(r"#[a-z][a-z0-9_-]{0,8}", fullmatch=True),
    st.from_regex(r"[a-z][a-z0-9_-]{0,8}\.(txt|json)", fullmatch=True),
)
_literal_strategy = st.one_of(
    st.text(max_size=12),
    st.integers(min_value=-1000, max_value=1000),
    st.booleans(),
    st.floats(allow_nan=False, allow_infinity=False, width=16),
)
_type_strategy = st.sampled_from(
    ["File", "Dataset", "CreateAction", "SoftwareApplication", "Person", "PropertyValue"]
)
_term_strategy = st.sampled_from(
    ["name", "description", "contentSize", "value", "alternateName"]
)


@st.composite
def crate_dicts(draw):
    ids = draw(st.lists(_id_strategy, min_size=0, max_size=5, unique=True))
    graph = [
        {"@id": "ro-crate-metadata.json", "@type": "CreativeWork", "about": {"@id": "./"}},
        {"@id": "./", "@type": "Dataset"},
    ]
    for entity_id in ids:
        member = {"@id": entity_id}
        types = draw(st.lists(_type_strategy, max_size=3, unique=True))
        if types:
            member["@type"] = types[0] if len(types) == 1 else types
        for term in draw(st.lists(_term_strategy, max_size=3, unique=True)):
            values = draw(
                st.lists(
                    st.one_of(
                        _literal_strategy,
                        st.sampled_from(ids).map(lambda i: {"@id": i}),
                    ),
                    min_size=1,
                    max_size=3,
                )
            )
            member[term] = values[0] if len(values) == 1 else values
        graph.append(member)
    return {"@context": "https://w3id.org/ro/crate/1.1/context", "@graph": graph}


@settings(max_examples=60, deadline=None)
@given(crate_dicts())
def test_round_trip_property(data):
    doc = parse_crate(json.dumps(data))
    text = serialize_crate(doc)
    again = parse_crate(text)
    assert doc_shape(again) == doc_shape(doc)
    assert serialize_crate(again) == text


@settings(max_examples=60, deadline=None)
@given(crate_dicts())
def test_normalization_idempotent(data):
    doc = parse_crate(json.dumps(data))
    again = parse_crate(serialize_crate(doc))
    assert serialize_crate(parse_crate(serialize_crate(again))) == serialize_crate(again)
