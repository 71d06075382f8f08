"""Corpus data model, verbalization of the four source kinds, and ingestion.

Source records arrive as JSONL files (entities, KB facts, text pages,
tables, infoboxes).  Every record is verbalized into a uniform sentence-like
snippet with comma-space separators, annotated with entity spans via exact
longest-match against the corpus alias dictionary, and indexed by the
entities it mentions.  The index is immutable after ingest; retrieval is
read-only.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

# Sentence-final abbreviations that do not end a sentence.
DEFAULT_ABBREVIATIONS = frozenset({
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "no.",
    "vs.", "etc.", "e.g.", "i.e.", "u.s.", "u.k.", "a.", "b.", "c.", "fc.",
})


class Source(enum.Enum):
    KB = "kb"
    INFOBOX = "infobox"
    TABLE = "table"
    TEXT = "text"


_SOURCE_RANK = {Source.KB: 0, Source.INFOBOX: 1, Source.TABLE: 2, Source.TEXT: 3}
_SOURCE_PREFIX = {Source.KB: "kb", Source.INFOBOX: "ib", Source.TABLE: "tb", Source.TEXT: "tx"}


class CorpusError(Exception):
    """Raised for schema violations; the message names file, line and field."""


@dataclass(frozen=True)
class Entity:
    id: str
    label: str
    aliases: tuple[str, ...] = ()
    types: tuple[str, ...] = ()  # ordered by frequency, most frequent first
    fact_count: int = 0

    def __post_init__(self):
        if not self.label:
            raise CorpusError("entity %r has an empty label" % self.id)

    def surface_forms(self) -> tuple[str, ...]:
        return (self.label, *self.aliases)


@dataclass(frozen=True)
class KBFact:
    subject: str
    predicate: str
    object: str | None  # entity id, exclusive with object_literal
    object_literal: str | None = None
    qualifiers: tuple[tuple[str, str | None, str | None], ...] = ()  # (predicate, entity id, literal)


@dataclass(frozen=True)
class TableRow:
    page_entity: str
    table_id: str
    row_index: int
    headers: tuple[str, ...]
    cells: tuple[str, ...]

    def __post_init__(self):
        if len(self.headers) != len(self.cells) or not self.cells:
            raise CorpusError(
                "table %r row %d: headers and cells must align and be non-empty"
                % (self.table_id, self.row_index)
            )


@dataclass(frozen=True)
class InfoboxEntry:
    entity: str
    attribute: str
    value: str
    section: str | None = None

    def __post_init__(self):
        if not self.attribute:
            raise CorpusError("infobox entry for %r has an empty attribute" % self.entity)


@dataclass(frozen=True)
class EntitySpan:
    entity_id: str
    span: tuple[int, int]


@dataclass(frozen=True)
class Evidence:
    """One verbalized snippet with entity annotations and provenance."""

    id: str
    text: str
    source: Source
    entities: tuple[EntitySpan, ...]
    provenance: dict
    temporal_mentions: tuple = ()  # attached lazily at retrieval time

    def __post_init__(self):
        if not self.text:
            raise CorpusError("evidence %r has empty text" % self.id)
        for es in self.entities:
            if not (0 <= es.span[0] < es.span[1] <= len(self.text)):
                raise CorpusError("evidence %r: span %r out of bounds" % (self.id, es.span))

    @property
    def source_rank(self) -> int:
        return _SOURCE_RANK[self.source]

    def with_mentions(self, mentions) -> "Evidence":
        return replace(self, temporal_mentions=tuple(mentions))

    def entity_ids(self) -> set[str]:
        return {es.entity_id for es in self.entities}


class AliasIndex:
    """Lowercased alias dictionary with longest-match span finding."""

    def __init__(self, entities: dict[str, Entity], skip_types: frozenset[str] = frozenset({"calendar year"})):
        self._entities = entities
        self._by_alias: dict[str, list[str]] = {}
        for entity in entities.values():
            # year pages would alias-match every bare year; leave them out
            if entity.types and entity.types[0] in skip_types:
                continue
            for form in entity.surface_forms():
                form = form.lower().strip()
                if form:
                    self._by_alias.setdefault(form, []).append(entity.id)
        for alias, ids in self._by_alias.items():
            ids.sort(key=lambda eid: (-entities[eid].fact_count, eid))
        self._ordered = sorted(self._by_alias, key=lambda a: (-len(a), a))

    def lookup(self, alias: str) -> list[str]:
        return list(self._by_alias.get(alias.lower().strip(), ()))

    def find_spans(self, text: str, occupied: list[tuple[int, int]] | None = None) -> list[EntitySpan]:
        """Non-overlapping alias matches, longest-first then leftmost.

        Matches must sit on word boundaries.  Ambiguous aliases resolve to
        the entity with the highest fact count, then lowest id.
        """
        lowered = text.lower()
        taken: list[tuple[int, int]] = list(occupied or [])
        found: list[EntitySpan] = []
        for alias in self._ordered:
            start = 0
            while True:
                idx = lowered.find(alias, start)
                if idx == -1:
                    break
                end = idx + len(alias)
                start = idx + 1
                if idx > 0 and (lowered[idx - 1].isalnum() or lowered[idx - 1] == "_"):
                    continue
                if end < len(lowered) and (lowered[end].isalnum() or lowered[end] == "_"):
                    continue
                if any(idx < t_end and t_start < end for t_start, t_end in taken):
                    continue
                taken.append((idx, end))
                found.append(EntitySpan(self._by_alias[alias][0], (idx, end)))
        found.sort(key=lambda es: es.span)
        return found


# -- verbalization -----------------------------------------------------------


def _fact_parts(fact: KBFact, entities: dict[str, Entity]) -> list[str]:
    def label_of(entity_id: str | None, literal: str | None) -> str:
        if entity_id is not None:
            if entity_id not in entities:
                raise CorpusError("unknown entity %r referenced by a KB fact" % entity_id)
            return entities[entity_id].label
        return literal if literal is not None else ""

    parts = [label_of(fact.subject, None), fact.predicate, label_of(fact.object, fact.object_literal)]
    for pred, ent, lit in fact.qualifiers:
        parts.extend([pred, label_of(ent, lit)])
    return parts


def verbalize_kb_fact_text(fact: KBFact, entities: dict[str, Entity]) -> str:
    """Concatenate the fact's parts with comma-space separators."""
    return ", ".join(_fact_parts(fact, entities))


def verbalize_table_row_text(row: TableRow) -> str:
    """Render "h1 is c1, h2 is c2, ..."; an empty header yields "is cell".

    The page entity label prefix is added by the caller.
    """
    pairs = []
    for header, cell in zip(row.headers, row.cells):
        pairs.append("%s is %s" % (header, cell) if header else "is %s" % cell)
    return ", ".join(pairs)


def verbalize_infobox_text(entry: InfoboxEntry, label: str) -> str:
    parts = [label]
    if entry.section:
        parts.append(entry.section)
    parts.extend([entry.attribute, entry.value])
    return ", ".join(parts)


def split_sentences(page_text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> list[tuple[int, int]]:
    """Sentence spans: split after .!? followed by whitespace and [A-Z0-9].

    A final token on the abbreviation exception list does not end a
    sentence.
    """
    spans = []
    start = 0
    for m in re.finditer(r"[.!?](\s+)(?=[A-Z0-9])", page_text):
        boundary = m.start() + 1
        last_token = re.search(r"\S+$", page_text[start:boundary])
        if last_token and last_token.group(0).lower() in abbreviations:
            continue
        spans.append((start, boundary))
        start = m.end(1)
    if start < len(page_text.rstrip()) or not spans:
        tail = (start, len(page_text))
        if page_text[tail[0]:tail[1]].strip():
            spans.append(tail)
    return spans


# -- ingestion ---------------------------------------------------------------


@dataclass
class CorpusIndex:
    """Immutable corpus index: entities, alias dictionary, evidence postings."""

    entities: dict[str, Entity]
    aliases: AliasIndex
    evidence: dict[str, Evidence]
    _postings: dict[str, list[str]]
    records: dict[str, list] = field(default_factory=dict)
    paths: dict[str, str] = field(default_factory=dict)

    def get_evidence(self, evidence_id: str) -> Evidence:
        return self.evidence[evidence_id]

    def retrieve_by_entity(self, entity_id: str) -> list[Evidence]:
        """All evidence mentioning the entity, KB/INFOBOX/TABLE/TEXT order."""
        return [self.evidence[eid] for eid in self._postings.get(entity_id, ())]

    def all_evidence(self) -> list[Evidence]:
        return sorted(self.evidence.values(), key=lambda e: (e.source_rank, e.id))


_FILE_NAMES = {
    "entities": "entities.jsonl",
    "kb_facts": "kb_facts.jsonl",
    "text": "text.jsonl",
    "tables": "tables.jsonl",
    "infoboxes": "infoboxes.jsonl",
}


def _read_jsonl(path: Path):
    if not path.exists():
        return
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError("%s:%d: invalid JSON (%s)" % (path.name, lineno, exc)) from None


def _require(record: dict, field_name: str, path: Path, lineno: int):
    if field_name not in record:
        raise CorpusError("%s:%d: missing field %r" % (path.name, lineno, field_name))
    return record[field_name]


def _object_ref(value, path: Path, lineno: int, field_name: str) -> tuple[str | None, str | None]:
    if not isinstance(value, dict) or not ({"id", "literal"} & set(value)):
        raise CorpusError("%s:%d: field %r must be {\"id\": ...} or {\"literal\": ...}" % (path.name, lineno, field_name))
    if "id" in value:
        return str(value["id"]), None
    return None, str(value["literal"])


def ingest(corpus_dir: str | Path, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS) -> CorpusIndex:
    """Build the immutable index from the JSONL files in ``corpus_dir``.

    Ingestion is single-writer and order-independent across files of
    different source kinds: evidence ids are numbered per source kind.
    """
    corpus_dir = Path(corpus_dir)
    entities: dict[str, Entity] = {}
    ent_path = corpus_dir / _FILE_NAMES["entities"]
    if not ent_path.exists():
        raise CorpusError("%s: file not found" % ent_path)
    for lineno, record in _read_jsonl(ent_path):
        entity = Entity(
            id=str(_require(record, "id", ent_path, lineno)),
            label=str(_require(record, "label", ent_path, lineno)),
            aliases=tuple(record.get("aliases", ())),
            types=tuple(record.get("types", ())),
            fact_count=int(record.get("fact_count", 0)),
        )
        if entity.id in entities:
            raise CorpusError("%s:%d: duplicate entity id %r" % (ent_path.name, lineno, entity.id))
        entities[entity.id] = entity

    aliases = AliasIndex(entities)
    evidence: dict[str, Evidence] = {}
    records: dict[str, list] = {"kb_facts": [], "tables": [], "infoboxes": [], "text": []}
    counters = {source: 0 for source in Source}

    def new_id(source: Source) -> str:
        counters[source] += 1
        return "%s-%05d" % (_SOURCE_PREFIX[source], counters[source])

    def label_for(entity_id: str, path: Path, lineno: int) -> str:
        if entity_id not in entities:
            raise CorpusError("%s:%d: unknown entity %r" % (path.name, lineno, entity_id))
        return entities[entity_id].label

    def add(source: Source, text: str, provenance: dict, extra_spans: list[EntitySpan] | None = None):
        spans = list(extra_spans or [])
        spans.extend(aliases.find_spans(text, [es.span for es in spans]))
        spans.sort(key=lambda es: es.span)
        evidence_id = new_id(source)
        evidence[evidence_id] = Evidence(evidence_id, text, source, tuple(spans), provenance)

    path = corpus_dir / _FILE_NAMES["kb_facts"]
    for lineno, record in _read_jsonl(path):
        subject = str(_require(record, "subject", path, lineno))
        label_for(subject, path, lineno)
        obj_id, obj_lit = _object_ref(_require(record, "object", path, lineno), path, lineno, "object")
        qualifiers = []
        for qual in record.get("qualifiers", ()):
            q_id, q_lit = _object_ref(_require(qual, "value", path, lineno), path, lineno, "qualifiers.value")
            qualifiers.append((str(_require(qual, "predicate", path, lineno)), q_id, q_lit))
        fact = KBFact(subject, str(_require(record, "predicate", path, lineno)), obj_id, obj_lit, tuple(qualifiers))
        records["kb_facts"].append(fact)
        add(Source.KB, verbalize_kb_fact_text(fact, entities),
            {"file": path.name, "line": lineno, "entity": subject})

    path = corpus_dir / _FILE_NAMES["infoboxes"]
    for lineno, record in _read_jsonl(path):
        entity_id = str(_require(record, "entity", path, lineno))
        label = label_for(entity_id, path, lineno)
        for item, raw in enumerate(_require(record, "entries", path, lineno)):
            entry = InfoboxEntry(
                entity=entity_id,
                attribute=str(_require(raw, "attribute", path, lineno)),
                value=str(_require(raw, "value", path, lineno)),
                section=raw.get("section"),
            )
            records["infoboxes"].append(entry)
            add(Source.INFOBOX, verbalize_infobox_text(entry, label),
                {"file": path.name, "line": lineno, "item": item, "entity": entity_id})

    path = corpus_dir / _FILE_NAMES["tables"]
    for lineno, record in _read_jsonl(path):
        entity_id = str(_require(record, "entity", path, lineno))
        label = label_for(entity_id, path, lineno)
        headers = tuple(str(h) for h in _require(record, "headers", path, lineno))
        for row_index, cells in enumerate(_require(record, "rows", path, lineno)):
            row = TableRow(entity_id, str(record.get("table_id", "t%d" % lineno)), row_index,
                           headers, tuple(str(c) for c in cells))
            records["tables"].append(row)
            text = "%s, %s" % (label, verbalize_table_row_text(row))
            add(Source.TABLE, text, {"file": path.name, "line": lineno, "item": row_index, "entity": entity_id})

    path = corpus_dir / _FILE_NAMES["text"]
    for lineno, record in _read_jsonl(path):
        entity_id = str(_require(record, "entity", path, lineno))
        label = label_for(entity_id, path, lineno)
        page_text = str(_require(record, "text", path, lineno))
        anchors = [(tuple(a["span"]), str(a["entity"])) for a in record.get("anchors", ())]
        records["text"].append(record)
        for item, (start, end) in enumerate(split_sentences(page_text, abbreviations)):
            sentence = page_text[start:end].strip()
            prefix = "%s, " % label
            text_out = prefix + sentence
            shift = len(prefix) - start - (len(page_text[start:end]) - len(page_text[start:end].lstrip()))
            extra = []
            for (a_start, a_end), a_entity in anchors:
                if start <= a_start and a_end <= end:
                    label_for(a_entity, path, lineno)
                    extra.append(EntitySpan(a_entity, (a_start + shift, a_end + shift)))
            add(Source.TEXT, text_out, {"file": path.name, "line": lineno, "item": item, "entity": entity_id}, extra)

    postings: dict[str, list[str]] = {}
    ordered = sorted(evidence.values(), key=lambda e: (e.source_rank, e.id))
    for ev in ordered:
        for entity_id in sorted(ev.entity_ids()):
            postings.setdefault(entity_id, []).append(ev.id)

    return CorpusIndex(entities, aliases, evidence, postings, records,
                       {name: str(corpus_dir / filename) for name, filename in _FILE_NAMES.items()})


def save_normalized(index: CorpusIndex, out_dir: str | Path) -> None:
    """Persist the validated corpus as canonical JSONL files.

    Re-running ingest on the output reproduces the same index, and the
    bytes are identical across runs.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, source_path in index.paths.items():
        target = out_dir / _FILE_NAMES[name]
        lines = []
        for _, record in _read_jsonl(Path(source_path)):
            lines.append(json.dumps(record, ensure_ascii=False, separators=(", ", ": ")))
        target.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def reverbalize(index: CorpusIndex, evidence_id: str) -> str:
    """Re-render an evidence snippet from its provenance locator.

    Used to check that every snippet is reproducible from its source
    record byte for byte.
    """
    ev = index.evidence[evidence_id]
    prov = ev.provenance
    path = Path(prov["file"])
    for name, full in index.paths.items():
        if Path(full).name == prov["file"]:
            path = Path(full)
            break
    for lineno, record in _read_jsonl(path):
        if lineno != prov["line"]:
            continue
        if ev.source is Source.KB:
            obj_id, obj_lit = _object_ref(record["object"], path, lineno, "object")
            qualifiers = tuple(
                (q["predicate"], *_object_ref(q["value"], path, lineno, "qualifiers.value"))
                for q in record.get("qualifiers", ())
            )
            fact = KBFact(str(record["subject"]), record["predicate"], obj_id, obj_lit, qualifiers)
            return verbalize_kb_fact_text(fact, index.entities)
        if ev.source is Source.INFOBOX:
            raw = record["entries"][prov["item"]]
            entry = InfoboxEntry(str(record["entity"]), raw["attribute"], raw["value"], raw.get("section"))
            return verbalize_infobox_text(entry, index.entities[entry.entity].label)
        if ev.source is Source.TABLE:
            cells = record["rows"][prov["item"]]
            row = TableRow(str(record["entity"]), str(record.get("table_id", "")), prov["item"],
                           tuple(str(h) for h in record["headers"]), tuple(str(c) for c in cells))
            return "%s, %s" % (index.entities[row.page_entity].label, verbalize_table_row_text(row))
        if ev.source is Source.TEXT:
            spans = split_sentences(str(record["text"]))
            start, end = spans[prov["item"]]
            return "%s, %s" % (index.entities[str(record["entity"])].label, str(record["text"])[start:end].strip())
    raise CorpusError("provenance %r does not resolve" % (prov,))
