"""Unified language representation.

Maps tables, image metadata, plain text, and conversation history into one
textual space. Table linearization is lossless: ``reconstruct_table``
recovers the exact header, rows, and title from the emitted sentence
sequence, which the randomized roundtrip tests exercise heavily.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import TableParseError, ValidationError

Modality = str  # "text" | "table" | "image"

MODALITIES = ("text", "table", "image")


@dataclass
class TextDoc:
    id: str
    text: str
    title: str | None = None


@dataclass
class TableDoc:
    id: str
    header: list[str]
    rows: list[list[str]]
    title: str | None = None

    def validate(self) -> None:
        if not self.header:
            raise ValidationError(f"table {self.id!r}: header must be non-empty")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.header):
                raise ValidationError(
                    f"table {self.id!r}: row {i} has {len(row)} cells, "
                    f"expected {len(self.header)}"
                )


@dataclass
class ObjectAttr:
    name: str
    attributes: list[str] = field(default_factory=list)

    def validate(self) -> None:
        if not self.name:
            raise ValidationError("object name must be non-empty")


@dataclass
class ImageMeta:
    id: str
    caption: str
    objects: list[ObjectAttr] = field(default_factory=list)
    title: str | None = None

    def validate(self) -> None:
        if not self.caption and not self.objects:
            raise ValidationError(
                f"image {self.id!r}: caption may be empty only when objects exist"
            )
        for obj in self.objects:
            obj.validate()


@dataclass(frozen=True)
class Clue:
    """One unit of the unified language space."""

    id: str
    modality: Modality
    text: str
    source_ref: str

    def validate(self) -> None:
        if not self.text:
            raise ValidationError(f"clue {self.id!r}: text must be non-empty")
        if self.modality not in MODALITIES:
            raise ValidationError(f"clue {self.id!r}: unknown modality {self.modality!r}")


@dataclass(frozen=True)
class ConversationTurn:
    question: str
    answer: str


@dataclass(frozen=True)
class ContextualQuestion:
    text: str
    turn_count: int


@dataclass(frozen=True)
class TextualizationConfig:
    use_global: bool = True
    use_local: bool = True
    max_history_turns: int = 8

    def __post_init__(self):
        if self.max_history_turns < 1:
            raise ValidationError("max_history_turns must be positive")


# ---------------------------------------------------------------------------
# Table linearization
# ---------------------------------------------------------------------------
#
# Grammar of the emitted text (fields are quote-encoded, see _encode_field):
#
#   table     := [title] (rows | columns)
#   title     := "Table: " field ". "
#   columns   := "Columns: " field (", " field)* "."     # only when 0 rows
#   rows      := row (" " row)*
#   row       := "Row " ordinal "'s " seg (", the " seg)* "."
#   seg       := field " is " field
#
# A field is emitted raw unless it could be confused with grammar text, in
# which case it is wrapped in double quotes with internal quotes doubled.

_ORDINAL_WORDS = ["one", "two", "three", "four", "five", "six", "seven",
                  "eight", "nine", "ten"]
_ORDINAL_TO_INT = {w: i + 1 for i, w in enumerate(_ORDINAL_WORDS)}

# Characters that collide with grammar delimiters, plus the quote char itself.
_QUOTE_CHARS = re.compile(r"[,.':\"]")
_LEADING_ROW = re.compile(r"Row\b")


def _ordinal(i: int) -> str:
    return _ORDINAL_WORDS[i - 1] if i <= 10 else str(i)


def _needs_quoting(text: str, header: bool) -> bool:
    if _QUOTE_CHARS.search(text) or _LEADING_ROW.match(text):
        return True
    # A raw header is parsed by scanning to the first " is ", so a header
    # that would introduce an earlier " is " must be quoted.
    if header and (" is " in text or text.endswith(" is")):
        return True
    return False


def _encode_field(text: str, header: bool = False) -> str:
    if _needs_quoting(text, header):
        return '"' + text.replace('"', '""') + '"'
    return text


def linearize_table(table: TableDoc) -> str:
    """Render a table as a reconstructible sentence sequence."""
    table.validate()
    parts: list[str] = []
    if table.title is not None:
        parts.append(f"Table: {_encode_field(table.title)}.")
    if not table.rows:
        # Header-only sentence so zero-row tables still roundtrip.
        cols = ", ".join(_encode_field(h, header=True) for h in table.header)
        parts.append(f"Columns: {cols}.")
    for i, row in enumerate(table.rows, start=1):
        segs = []
        for j, (head, cell) in enumerate(zip(table.header, row)):
            prefix = "the " if j else ""
            segs.append(f"{prefix}{_encode_field(head, header=True)} is {_encode_field(cell)}")
        parts.append(f"Row {_ordinal(i)}'s " + ", ".join(segs) + ".")
    return " ".join(parts)


class _Cursor:
    """Character cursor over linearized table text."""

    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str, pos: int | None = None):
        raise TableParseError(message, self.pos if pos is None else pos)

    def at_end(self) -> bool:
        return self.pos >= len(self.text)

    def looking_at(self, literal: str) -> bool:
        return self.text.startswith(literal, self.pos)

    def expect(self, literal: str, what: str) -> None:
        if not self.looking_at(literal):
            self.fail(f"expected {what}")
        self.pos += len(literal)

    def scan_to(self, stops: tuple[str, ...], what: str) -> str:
        """Return text up to the earliest stop marker (marker not consumed)."""
        best = -1
        for stop in stops:
            idx = self.text.find(stop, self.pos)
            if idx != -1 and (best == -1 or idx < best):
                best = idx
        if best == -1:
            self.fail(f"missing {what}")
        out = self.text[self.pos:best]
        self.pos = best
        return out

    def parse_field(self, stops: tuple[str, ...], what: str) -> str:
        if self.looking_at('"'):
            start = self.pos
            self.pos += 1
            out = []
            while True:
                idx = self.text.find('"', self.pos)
                if idx == -1:
                    self.fail("unterminated quote", start)
                out.append(self.text[self.pos:idx])
                if self.text.startswith('""', idx):
                    out.append('"')
                    self.pos = idx + 2
                else:
                    self.pos = idx + 1
                    return "".join(out)
        return self.scan_to(stops, what)


def _parse_ordinal(cur: _Cursor, expected: int) -> None:
    word = cur.scan_to(("'s ",), "row ordinal marker \"'s\"")
    value = _ORDINAL_TO_INT.get(word)
    if value is None:
        if not word.isdigit():
            cur.fail(f"unrecognized row ordinal {word!r}", cur.pos - len(word))
        value = int(word)
    if value != expected or word != _ordinal(expected):
        cur.fail(f"row ordinal {word!r} out of sequence, expected row {expected}",
                 cur.pos - len(word))
    cur.expect("'s ", "row ordinal marker \"'s\"")


def _parse_row(cur: _Cursor, index: int) -> list[tuple[str, str]]:
    cur.expect("Row ", 'row sentence starting with "Row"')
    _parse_ordinal(cur, index)
    segs: list[tuple[str, str]] = []
    while True:
        if segs:
            cur.expect("the ", 'segment prefix "the"')
        head = cur.parse_field((" is ",), 'segment delimiter " is "')
        cur.expect(" is ", 'segment delimiter " is "')
        cell = cur.parse_field((",", "."), "end of cell")
        segs.append((head, cell))
        if cur.looking_at("."):
            cur.pos += 1
            return segs
        cur.expect(", ", 'segment separator ", the"')


def reconstruct_table(text: str) -> TableDoc:
    """Parse linearized table text back into a TableDoc (id left empty).

    Raises TableParseError with a character offset on malformed input,
    including unterminated quotes and headers that differ between rows.
    """
    if not text:
        raise TableParseError("empty input", 0)
    cur = _Cursor(text)
    title: str | None = None
    if cur.looking_at("Table: "):
        cur.pos += len("Table: ")
        title = cur.parse_field((".",), "end of title")
        cur.expect(".", "end of title")
        if cur.at_end():
            cur.fail("missing table body after title")
        cur.expect(" ", "space after title")

    if cur.looking_at("Columns: "):
        cur.pos += len("Columns: ")
        header: list[str] = []
        while True:
            header.append(cur.parse_field((",", "."), "end of column name"))
            if cur.looking_at("."):
                cur.pos += 1
                break
            cur.expect(", ", 'column separator ", "')
        if not cur.at_end():
            cur.fail("trailing text after column list")
        return TableDoc(id="", header=header, rows=[], title=title)

    header = []
    rows: list[list[str]] = []
    index = 1
    while True:
        row_start = cur.pos
        segs = _parse_row(cur, index)
        seg_header = [h for h, _ in segs]
        if index == 1:
            header = seg_header
        elif seg_header != header:
            cur.fail("inconsistent headers across rows", row_start)
        rows.append([c for _, c in segs])
        index += 1
        if cur.at_end():
            return TableDoc(id="", header=header, rows=rows, title=title)
        cur.expect(" ", "space between row sentences")


# ---------------------------------------------------------------------------
# Image textualization and contextual questions
# ---------------------------------------------------------------------------

def textualize_image(meta: ImageMeta, cfg: TextualizationConfig) -> str:
    """Splice the global (title + caption) and local (object) descriptions."""
    meta.validate()
    if not cfg.use_global and not cfg.use_local:
        raise ValidationError(
            f"image {meta.id!r}: both global and local textualization disabled"
        )
    global_part = ""
    if cfg.use_global:
        global_part = ". ".join(p for p in (meta.title, meta.caption) if p)
    local_part = ""
    if cfg.use_local and meta.objects:
        local_part = "; ".join(
            " ".join([*obj.attributes, obj.name]) for obj in meta.objects
        )
    if global_part and local_part:
        return f"{global_part}. Objects: {local_part}."
    if global_part:
        return f"{global_part}."
    if local_part:
        return f"Objects: {local_part}."
    raise ValidationError(f"image {meta.id!r}: no textualizable content")


def build_contextual_question(
    history: list[ConversationTurn],
    current: str,
    cfg: TextualizationConfig,
) -> ContextualQuestion:
    """Concatenate recent conversation turns with the current question."""
    if not current:
        raise ValidationError("current question must be non-empty")
    kept = history[-cfg.max_history_turns:] if history else []
    if not kept:
        return ContextualQuestion(text=current, turn_count=0)
    rendered = " ".join(f"Q: {t.question} A: {t.answer}" for t in kept)
    return ContextualQuestion(text=f"{rendered} Q: {current}", turn_count=len(kept))


def make_clue(doc: TextDoc | TableDoc | ImageMeta, cfg: TextualizationConfig) -> Clue:
    """Convert any source document into a clue of the unified space."""
    if isinstance(doc, TextDoc):
        text = f"{doc.title}. {doc.text}" if doc.title else doc.text
        modality = "text"
    elif isinstance(doc, TableDoc):
        text = linearize_table(doc)
        modality = "table"
    elif isinstance(doc, ImageMeta):
        text = textualize_image(doc, cfg)
        modality = "image"
    else:
        raise ValidationError(f"unsupported document type {type(doc).__name__}")
    clue = Clue(id=doc.id, modality=modality, text=text, source_ref=doc.id)
    clue.validate()
    return clue
