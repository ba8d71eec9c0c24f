"""Triple expansion and basic graph-pattern matching over a crate.

The triple view lets crates be queried like any RDF dataset; the built-in
actions query joins executions with their instruments and optional
start/end times.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Union

from .errors import WrcrateError
from .model import CrateDocument, Reference, parse_timestamp
from .terms import RDF_TYPE, SCHEMA_ORG, UNKNOWN_SCHEME, XSD_DATETIME, expand_term


@dataclass(frozen=True)
class Literal:
    text: str
    datatype: str | None = None


#: A triple object is either an IRI string or a Literal.
TripleObject = Union[str, Literal]


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: str
    object: TripleObject


#: Pattern positions: a bound IRI string, a bound Literal, or a "?name" wildcard.
Term = Union[str, Literal]


@dataclass(frozen=True)
class Pattern:
    s: Term
    p: Term
    o: Term
    optional: bool = False


class PatternSyntaxError(WrcrateError):
    pass


def _literal_for(value) -> Literal:
    if isinstance(value, bool):
        return Literal("true" if value else "false")
    if isinstance(value, (int, float)):
        return Literal(json.dumps(value))
    text = str(value)
    if parse_timestamp(text) is not None:
        return Literal(text, XSD_DATETIME)
    return Literal(text)


def _object_sort_key(obj: TripleObject):
    if isinstance(obj, Literal):
        return (1, obj.text, obj.datatype or "")
    return (0, obj, "")


def expand_triples(doc: CrateDocument) -> list[Triple]:
    """Expand every entity into rdf:type and property triples.

    Predicates expand through the pinned term table; unknown terms land
    under the reserved ``unknown:`` scheme rather than failing.
    """
    triples: list[Triple] = []
    for entity in doc.entities.values():
        for type_name in entity.types:
            triples.append(Triple(entity.id, RDF_TYPE, expand_term(type_name)))
        for term, values in entity.properties.items():
            predicate = expand_term(term)
            for value in values:
                if isinstance(value, Reference):
                    triples.append(Triple(entity.id, predicate, value.id))
                else:
                    triples.append(Triple(entity.id, predicate, _literal_for(value)))
    triples.sort(key=lambda t: (t.subject, t.predicate, _object_sort_key(t.object)))
    return triples


def unknown_terms(triples: list[Triple]) -> list[str]:
    """Terms that expanded under the reserved ``unknown:`` scheme."""
    flagged = set()
    for t in triples:
        if t.predicate.startswith(UNKNOWN_SCHEME):
            flagged.add(t.predicate[len(UNKNOWN_SCHEME):])
        if isinstance(t.object, str) and t.object.startswith(UNKNOWN_SCHEME):
            flagged.add(t.object[len(UNKNOWN_SCHEME):])
    return sorted(flagged)


def _is_wildcard(term: Term) -> bool:
    return isinstance(term, str) and term.startswith("?")


def _term_matches(term: Term, part, binding: dict) -> bool:
    if _is_wildcard(term):
        bound = binding.get(term)
        return bound is None or bound == part
    if isinstance(term, Literal):
        # Bound literals compare on text; datatype tags are matching hints.
        return isinstance(part, Literal) and part.text == term.text
    return part == term


def _extend(binding: dict, pattern: Pattern, triple: Triple) -> dict:
    extended = dict(binding)
    for term, part in ((pattern.s, triple.subject), (pattern.p, triple.predicate), (pattern.o, triple.object)):
        if _is_wildcard(term):
            extended[term] = part
    return extended


def _row_sort_key(variables: list[str], binding: dict):
    key = []
    for var in variables:
        value = binding.get(var)
        if value is None:
            key.append((1, "", ""))
        elif isinstance(value, Literal):
            key.append((0, value.text, value.datatype or ""))
        else:
            key.append((0, value, ""))
    return key


def match(triples: list[Triple], patterns: list[Pattern]) -> list[dict]:
    """All consistent wildcard bindings, via nested-loop join.

    Optional patterns extend a binding when they can and otherwise leave
    their wildcards unbound. Rows come back deterministically ordered by
    binding values.
    """
    rows: list[dict] = [{}]
    for pattern in patterns:
        next_rows: list[dict] = []
        for binding in rows:
            matched = False
            for triple in triples:
                if (
                    _term_matches(pattern.s, triple.subject, binding)
                    and _term_matches(pattern.p, triple.predicate, binding)
                    and _term_matches(pattern.o, triple.object, binding)
                ):
                    next_rows.append(_extend(binding, pattern, triple))
                    matched = True
            if not matched and pattern.optional:
                next_rows.append(binding)
        rows = next_rows

    variables = []
    for pattern in patterns:
        for term in (pattern.s, pattern.p, pattern.o):
            if _is_wildcard(term) and term not in variables:
                variables.append(term)
    rows.sort(key=lambda b: _row_sort_key(variables, b))
    return rows


_ACTIONS_PATTERNS = [
    Pattern("?action", RDF_TYPE, SCHEMA_ORG + "CreateAction"),
    Pattern("?action", SCHEMA_ORG + "instrument", "?instrument"),
    Pattern("?action", SCHEMA_ORG + "startTime", "?start", optional=True),
    Pattern("?action", SCHEMA_ORG + "endTime", "?end", optional=True),
]


def builtin_actions_query(
    doc: CrateDocument,
) -> list[tuple[str, str, str | None, str | None]]:
    """All executions with their instruments and optional start/end times."""
    rows = match(expand_triples(doc), _ACTIONS_PATTERNS)
    out = []
    for binding in rows:
        start = binding.get("?start")
        end = binding.get("?end")
        out.append(
            (
                binding["?action"],
                binding["?instrument"],
                start.text if isinstance(start, Literal) else start,
                end.text if isinstance(end, Literal) else end,
            )
        )
    return out


_TOKEN_RE = re.compile(r'\?\w+|<[^<>]*>|"[^"]*"')


def parse_pattern(text: str) -> Pattern:
    """Parse one textual pattern: three terms, optionally prefixed OPTIONAL.

    Each term is ``?var``, ``<iri>`` or ``"literal"``.
    """
    stripped = text.strip()
    optional = False
    if stripped.startswith("OPTIONAL"):
        optional = True
        stripped = stripped[len("OPTIONAL"):].strip()
    tokens = _TOKEN_RE.findall(stripped)
    if len(tokens) != 3 or _TOKEN_RE.sub("", stripped).strip():
        raise PatternSyntaxError(
            f"pattern {text!r} must be three terms: ?var, <iri> or \"literal\""
        )
    terms: list[Term] = []
    for token in tokens:
        if token.startswith("?"):
            terms.append(token)
        elif token.startswith("<"):
            terms.append(token[1:-1])
        else:
            terms.append(Literal(token[1:-1]))
    return Pattern(terms[0], terms[1], terms[2], optional=optional)
