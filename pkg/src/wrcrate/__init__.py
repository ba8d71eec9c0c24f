"""wrcrate: a toolkit for Workflow Run RO-Crates.

Read, validate, report on, query, export and generate crates that capture
the prospective and retrospective provenance of computational workflow
executions, at three nested levels of detail (Process, Workflow and
Provenance Run Crate).
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    CrateDocument,
    Entity,
    Reference,
    declared_profiles,
    load_crate,
    parse_crate,
    profile_declarations,
    resolve,
    serialize_crate,
)
from .terms import (  # noqa: F401
    PROCESS_PROFILE,
    PROVENANCE_PROFILE,
    WORKFLOW_PROFILE,
    ProfileId,
    ProfileKind,
)
