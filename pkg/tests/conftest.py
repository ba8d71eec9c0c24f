"""Shared fixtures: disk crates, dict-based crate builders, the demo run."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import pytest

from wrcrate.engine import AgentDescriptor, execute, load_plan
from wrcrate.model import CrateDocument, parse_crate, load_crate

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
DEMO = Path(__file__).parent.parent / "demo"

PROCESS_IRI = "https://w3id.org/ro/wfrun/process/0.5"
WORKFLOW_IRI = "https://w3id.org/ro/wfrun/workflow/0.5"
PROVENANCE_IRI = "https://w3id.org/ro/wfrun/provenance/0.5"
WORKFLOW_RO_CRATE_IRI = "https://w3id.org/workflowhub/workflow-ro-crate/1.0"


def crate_json(*entities: dict, context: object = "https://w3id.org/ro/crate/1.1/context") -> dict:
    return {"@context": context, "@graph": list(entities)}


def parse_dict(data: dict) -> CrateDocument:
    return parse_crate(json.dumps(data))


def minimal_process_dict() -> dict:
    """A clean conformant Process crate: one action, proper agent and times."""
    return crate_json(
        {
            "@id": "ro-crate-metadata.json",
            "@type": "CreativeWork",
            "conformsTo": {"@id": "https://w3id.org/ro/crate/1.1"},
            "about": {"@id": "./"},
        },
        {
            "@id": "./",
            "@type": "Dataset",
            "name": "one tool run",
            "conformsTo": {"@id": PROCESS_IRI},
            "hasPart": [{"@id": "input.txt"}, {"@id": "output.txt"}],
        },
        {
            "@id": "#action",
            "@type": "CreateAction",
            "instrument": {"@id": "#tool"},
            "agent": {"@id": "#person"},
            "startTime": "2024-03-01T10:00:00+00:00",
            "endTime": "2024-03-01T10:05:00+00:00",
            "object": {"@id": "input.txt"},
            "result": {"@id": "output.txt"},
        },
        {"@id": "#tool", "@type": "SoftwareApplication", "name": "copier"},
        {"@id": "#person", "@type": "Person", "name": "Jo Smith"},
        {"@id": "input.txt", "@type": "File", "contentSize": "12"},
        {"@id": "output.txt", "@type": "File", "contentSize": "12"},
    )


def minimal_workflow_dict() -> dict:
    """A clean conformant Workflow crate built on the process baseline."""
    return crate_json(
        {
            "@id": "ro-crate-metadata.json",
            "@type": "CreativeWork",
            "conformsTo": {"@id": "https://w3id.org/ro/crate/1.1"},
            "about": {"@id": "./"},
        },
        {
            "@id": "./",
            "@type": "Dataset",
            "name": "one workflow run",
            "conformsTo": [
                {"@id": WORKFLOW_IRI},
                {"@id": WORKFLOW_RO_CRATE_IRI},
            ],
            "mainEntity": {"@id": "wf.cwl"},
            "hasPart": [{"@id": "wf.cwl"}, {"@id": "input.txt"}, {"@id": "output.txt"}],
        },
        {
            "@id": "wf.cwl",
            "@type": ["File", "SoftwareSourceCode", "ComputationalWorkflow"],
            "name": "wf",
            "programmingLanguage": {"@id": "#lang"},
            "input": [{"@id": "wf.cwl#in"}],
            "output": [{"@id": "wf.cwl#out"}],
        },
        {"@id": "#lang", "@type": "ComputerLanguage", "name": "toy language"},
        {
            "@id": "wf.cwl#in",
            "@type": "FormalParameter",
            "additionalType": "File",
            "name": "in",
        },
        {
            "@id": "wf.cwl#out",
            "@type": "FormalParameter",
            "additionalType": "File",
            "name": "out",
        },
        {
            "@id": "#run",
            "@type": "CreateAction",
            "instrument": {"@id": "wf.cwl"},
            "agent": {"@id": "#person"},
            "startTime": "2024-03-01T10:00:00+00:00",
            "endTime": "2024-03-01T10:05:00+00:00",
            "object": {"@id": "input.txt"},
            "result": {"@id": "output.txt"},
        },
        {"@id": "#person", "@type": "Person", "name": "Jo Smith"},
        {
            "@id": "input.txt",
            "@type": "File",
            "contentSize": "12",
            "exampleOfWork": {"@id": "wf.cwl#in"},
        },
        {
            "@id": "output.txt",
            "@type": "File",
            "contentSize": "12",
            "exampleOfWork": {"@id": "wf.cwl#out"},
        },
    )


@pytest.fixture(scope="session")
def pathology_doc() -> CrateDocument:
    return load_crate(FIXTURES / "pathology")


@pytest.fixture(scope="session")
def training_doc() -> CrateDocument:
    return load_crate(FIXTURES / "training")


@pytest.fixture(scope="session")
def snippet_doc() -> CrateDocument:
    return load_crate(FIXTURES / "snippet")


@pytest.fixture(scope="session")
def demo_plan_text() -> str:
    return (DEMO / "head_sort_plan.json").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def demo_input() -> Path:
    return DEMO / "lines.txt"


@pytest.fixture(scope="session")
def demo_run(tmp_path_factory, demo_plan_text, demo_input):
    """One deterministic execution of the bundled head/sort plan."""
    out_dir = tmp_path_factory.mktemp("demo-crate")
    plan = load_plan(demo_plan_text)
    doc, record = execute(
        plan,
        {"src": str(demo_input)},
        out_dir,
        agent=AgentDescriptor(name="Jo Smith"),
        deterministic_ids=True,
    )
    return plan, doc, record, out_dir


@pytest.fixture(scope="session")
def engine_doc(demo_run) -> CrateDocument:
    return demo_run[1]


def mutate(base: dict, entity_id: str, **changes) -> dict:
    """Copy a crate dict, applying property changes (None deletes) to one entity."""
    data = copy.deepcopy(base)
    for member in data["@graph"]:
        if member["@id"] == entity_id:
            for key, value in changes.items():
                if value is None:
                    member.pop(key, None)
                else:
                    member[key] = value
            return data
    raise KeyError(entity_id)


def drop_entity(base: dict, entity_id: str) -> dict:
    data = copy.deepcopy(base)
    data["@graph"] = [m for m in data["@graph"] if m["@id"] != entity_id]
    return data


def add_entity(base: dict, entity: dict) -> dict:
    data = copy.deepcopy(base)
    data["@graph"].append(entity)
    return data


@pytest.fixture(scope="session")
def corpus(pathology_doc, training_doc, snippet_doc, engine_doc) -> list[tuple[str, CrateDocument]]:
    """Every fixture document, for corpus-wide property tests."""
    docs = [
        ("pathology", pathology_doc),
        ("training", training_doc),
        ("snippet", snippet_doc),
        ("engine-demo", engine_doc),
        ("minimal-process", parse_dict(minimal_process_dict())),
        ("minimal-workflow", parse_dict(minimal_workflow_dict())),
    ]
    return docs
