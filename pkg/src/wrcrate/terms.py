"""Pinned term table and profile identifiers.

Term semantics are fixed here rather than resolved from a remote
``@context``, so every operation works offline and deterministically.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

SCHEMA_ORG = "https://schema.org/"
BIOSCHEMAS = "https://bioschemas.org/"
BIOSCHEMAS_PROPS = "https://bioschemas.org/properties/"
WFRUN = "https://w3id.org/ro/terms/workflow-run#"

RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"
XSD = "http://www.w3.org/2001/XMLSchema#"
XSD_DATETIME = XSD + "dateTime"
PROV = "http://www.w3.org/ns/prov#"

#: Scheme used to expand term names that are not in the pinned table.
UNKNOWN_SCHEME = "unknown:"

METADATA_DESCRIPTOR_ID = "ro-crate-metadata.json"
RO_CRATE_SPEC_IRI = "https://w3id.org/ro/crate/1.1"
WORKFLOW_RO_CRATE_PROFILE_IRI = "https://w3id.org/workflowhub/workflow-ro-crate/1.0"

_SCHEMA_TERMS = (
    "CreateAction",
    "ControlAction",
    "OrganizeAction",
    "instrument",
    "object",
    "result",
    "agent",
    "startTime",
    "endTime",
    "actionStatus",
    "error",
    "description",
    "subjectOf",
    "Person",
    "Organization",
    "SoftwareApplication",
    "SoftwareSourceCode",
    "Dataset",
    "MediaObject",
    "PropertyValue",
    "value",
    "Collection",
    "hasPart",
    "mainEntity",
    "alternateName",
    "name",
    "contentSize",
    "encodingFormat",
    "exampleOfWork",
    "workExample",
    "HowToStep",
    "step",
    "programmingLanguage",
    "ComputerLanguage",
    "conformsTo",
    "about",
    "CreativeWork",
    "HowTo",
    "additionalType",
    "CompletedActionStatus",
    "FailedActionStatus",
)

_BIOSCHEMAS_TYPES = ("ComputationalWorkflow", "FormalParameter")
_BIOSCHEMAS_PROPS = ("input", "output", "valueRequired")
_WFRUN_TERMS = ("ParameterConnection", "sourceParameter", "targetParameter", "connection")

#: term name -> absolute IRI, spanning the three pinned namespaces.
TERM_TO_IRI: dict[str, str] = {}
TERM_TO_IRI.update({t: SCHEMA_ORG + t for t in _SCHEMA_TERMS})
TERM_TO_IRI.update({t: BIOSCHEMAS + t for t in _BIOSCHEMAS_TYPES})
TERM_TO_IRI.update({t: BIOSCHEMAS_PROPS + t for t in _BIOSCHEMAS_PROPS})
TERM_TO_IRI.update({t: WFRUN + t for t in _WFRUN_TERMS})

# RO-Crate convention: the type written "File" denotes s:MediaObject.
TERM_TO_IRI["File"] = SCHEMA_ORG + "MediaObject"
TYPE_ALIASES = {"File": "MediaObject", "MediaObject": "File"}


def canonical_type(name: str) -> str:
    """Map a type name to its canonical form (``File`` -> ``MediaObject``)."""
    return "MediaObject" if name == "File" else name


def expand_term(name: str) -> str:
    """Expand a term name to its IRI; unknown names go under ``unknown:``."""
    return TERM_TO_IRI.get(name, UNKNOWN_SCHEME + name)


class ProfileKind(Enum):
    PROCESS = "process"
    WORKFLOW = "workflow"
    PROVENANCE = "provenance"


#: Specificity order used by automatic profile selection.
PROFILE_SPECIFICITY = {
    ProfileKind.PROCESS: 0,
    ProfileKind.WORKFLOW: 1,
    ProfileKind.PROVENANCE: 2,
}

PROFILE_VERSION = "0.5"


@dataclass(frozen=True)
class ProfileId:
    kind: ProfileKind
    version: str
    iri: str


_PROFILE_BASE = "https://w3id.org/ro/wfrun/"

PROCESS_PROFILE = ProfileId(
    ProfileKind.PROCESS, PROFILE_VERSION, f"{_PROFILE_BASE}process/{PROFILE_VERSION}"
)
WORKFLOW_PROFILE = ProfileId(
    ProfileKind.WORKFLOW, PROFILE_VERSION, f"{_PROFILE_BASE}workflow/{PROFILE_VERSION}"
)
PROVENANCE_PROFILE = ProfileId(
    ProfileKind.PROVENANCE, PROFILE_VERSION, f"{_PROFILE_BASE}provenance/{PROFILE_VERSION}"
)

PROFILES = {
    ProfileKind.PROCESS: PROCESS_PROFILE,
    ProfileKind.WORKFLOW: WORKFLOW_PROFILE,
    ProfileKind.PROVENANCE: PROVENANCE_PROFILE,
}


def profile_for_iri(iri: str) -> tuple[ProfileId, bool] | None:
    """Match an IRI against the known profile IRIs.

    Returns the matching profile and a version-mismatch flag; IRIs that share
    a profile's prefix but carry a different version suffix still match, with
    the flag set. Returns None for unrelated IRIs.
    """
    for profile in PROFILES.values():
        if iri == profile.iri:
            return profile, False
        prefix = profile.iri.rsplit("/", 1)[0] + "/"
        if iri.startswith(prefix):
            return profile, True
    return None
