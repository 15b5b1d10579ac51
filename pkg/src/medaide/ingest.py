"""Medical corpus ingestion: CSV rows to instruction records.

Raw CSV exports (one row per condition, columns like Disease / Symptom /
Reason / Tests And Procedures / Common Medications) are converted into
instruction records, refined (incomplete and deleted entries dropped,
emails and phone numbers redacted, exact duplicates removed), and stored
as canonical JSONL.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .errors import MedaideError

QUESTION_TEMPLATE = (
    "What are the symptoms, reasons, tests and procedures, "
    "and common medications for {disease}?"
)

DEFAULT_DELETED_MARKERS = frozenset({"[deleted]", "[removed]", "deleted"})

REDACTION = "[REDACTED]"

JSONL_KEYS = ("instruction", "input", "output", "source_tag", "id")

_EMAIL_RE = re.compile(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}")
# Candidate phone strings; kept only when they contain >= 7 digits so plain
# dosages and years survive.
_PHONE_RE = re.compile(r"\+?\d[\d\s().-]{5,}\d")


class MalformedCsv(MedaideError):
    def __init__(self, row_number: int, message: str = "malformed CSV"):
        super().__init__(f"row {row_number}: {message}")
        self.row_number = row_number


class MissingColumn(MedaideError):
    def __init__(self, name: str):
        super().__init__(f"column {name!r} not present")
        self.name = name


class MalformedJsonl(MedaideError):
    def __init__(self, line_number: int, message: str = "bad record"):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class RawRecord:
    """One parsed CSV data row; fields preserve column order."""

    source_tag: str
    fields: dict[str, str]
    row_number: int

    def __post_init__(self) -> None:
        if not self.source_tag:
            raise MedaideError("source_tag must be non-empty")
        if not self.fields:
            raise MedaideError("fields must be non-empty")
        if self.row_number < 1:
            raise MedaideError(f"row_number must be >= 1, got {self.row_number}")


@dataclass(frozen=True)
class InstructionRecord:
    id: str
    instruction: str
    input: str
    output: str
    source_tag: str


@dataclass(frozen=True)
class RefinementReport:
    kept: int = 0
    dropped_incomplete: int = 0
    dropped_deleted: int = 0
    dropped_pii_scrubbed: int = 0  # records modified in place, not dropped
    dropped_duplicate: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "kept": self.kept,
            "dropped_incomplete": self.dropped_incomplete,
            "dropped_deleted": self.dropped_deleted,
            "dropped_pii_scrubbed": self.dropped_pii_scrubbed,
            "dropped_duplicate": self.dropped_duplicate,
        }


@dataclass(frozen=True)
class SourceEntry:
    source_tag: str
    display_name: str
    expected_samples: int | None = None


@dataclass(frozen=True)
class SourceRegistry:
    entries: tuple[SourceEntry, ...] = ()

    def __post_init__(self) -> None:
        tags = [e.source_tag for e in self.entries]
        if len(set(tags)) != len(tags):
            raise MedaideError("registry source_tags must be unique")

    @classmethod
    def from_json(cls, obj: dict) -> "SourceRegistry":
        entries = []
        for e in obj.get("entries", []):
            expected = e.get("expected_samples")
            entries.append(
                SourceEntry(
                    source_tag=str(e["source_tag"]),
                    display_name=str(e.get("display_name", e["source_tag"])),
                    expected_samples=int(expected) if expected is not None else None,
                )
            )
        return cls(entries=tuple(entries))


def load_registry(path: str | Path) -> SourceRegistry:
    return SourceRegistry.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def content_id(instruction: str, output: str) -> str:
    """SHA-256 over lowercased, whitespace-collapsed (instruction, output)."""

    def norm(text: str) -> str:
        return " ".join(text.lower().split())

    payload = norm(instruction) + chr(0) + norm(output)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def make_record(instruction: str, output: str, source_tag: str, input_text: str = "") -> InstructionRecord:
    return InstructionRecord(
        id=content_id(instruction, output),
        instruction=instruction,
        input=input_text,
        output=output,
        source_tag=source_tag,
    )


# --- CSV parsing ---------------------------------------------------------
#
# A small RFC-4180 state machine instead of the csv module: the error
# contract needs the row number of an unbalanced quote, which the stdlib
# reader cannot report (it swallows the rest of the file into one field).


def _tokenize_csv(text: str) -> list[tuple[int, list[str]]]:
    rows: list[tuple[int, list[str]]] = []
    cells: list[str] = []
    buf: list[str] = []
    row_number = 1
    quoted_row_start = row_number
    in_quotes = False
    after_quote = False  # just closed a quoted field; only , \n or EOF legal
    row_has_content = False
    i = 0
    n = len(text)

    def end_field() -> None:
        cells.append("".join(buf))
        buf.clear()

    def end_row() -> None:
        nonlocal row_number, row_has_content
        end_field()
        rows.append((row_number, cells.copy()))
        cells.clear()
        row_number += 1
        row_has_content = False

    while i < n:
        ch = text[i]
        if in_quotes:
            if ch == '"':
                if i + 1 < n and text[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                in_quotes = False
                after_quote = True
            else:
                buf.append(ch)
            i += 1
            continue
        if after_quote and ch not in ',\r\n':
            raise MalformedCsv(row_number, f"unexpected {ch!r} after closing quote")
        if ch == '"' and not buf and not after_quote:
            in_quotes = True
            quoted_row_start = row_number
            row_has_content = True
            i += 1
            continue
        if ch == ",":
            end_field()
            after_quote = False
            row_has_content = True
            i += 1
            continue
        if ch == "\r" or ch == "\n":
            if ch == "\r" and i + 1 < n and text[i + 1] == "\n":
                i += 1
            if row_has_content or buf or cells:
                end_row()
            else:
                row_number += 1
            after_quote = False
            i += 1
            continue
        buf.append(ch)
        row_has_content = True
        after_quote = False
        i += 1

    if in_quotes:
        raise MalformedCsv(quoted_row_start, "unterminated quoted field")
    if row_has_content or buf or cells:
        end_row()
    return rows


def parse_csv(data: bytes, has_header: bool = True) -> list[RawRecord]:
    """Parse RFC-4180 CSV bytes into raw records.

    Quoted fields may contain commas, quotes (doubled), and newlines. Every
    row must have the same number of columns as the header (or the first row
    when there is no header). Blank lines are skipped. The source_tag is
    filled in later by the caller; records come back tagged "csv".
    """
    try:
        text = data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        row = data[: exc.start].count(b"\n") + 1
        raise MalformedCsv(row, f"not valid UTF-8: {exc.reason}") from exc
    rows = _tokenize_csv(text)
    if not rows:
        return []
    if has_header:
        header_row, columns = rows[0]
        data_rows = rows[1:]
        if len(set(columns)) != len(columns):
            raise MalformedCsv(header_row, "duplicate column names in header")
    else:
        columns = [f"col{i + 1}" for i in range(len(rows[0][1]))]
        data_rows = rows
    records: list[RawRecord] = []
    for row_number, cells in data_rows:
        if len(cells) != len(columns):
            raise MalformedCsv(
                row_number, f"expected {len(columns)} columns, got {len(cells)}"
            )
        records.append(
            RawRecord(source_tag="csv", fields=dict(zip(columns, cells)), row_number=row_number)
        )
    return records


def csv_to_instruction(
    record: RawRecord,
    disease_column: str = "Disease",
    source_tag: str | None = None,
    translate_hook: Callable[[str], str] | None = None,
) -> InstructionRecord:
    """Turn one CSV row into a question/answer instruction record.

    The question comes from the fixed template over the disease column; the
    answer renders each remaining non-empty column as a "Column: value" line
    in the original column order. translate_hook (default identity) is
    applied to every cell before rendering.
    """
    if disease_column not in record.fields:
        raise MissingColumn(disease_column)
    hook = translate_hook or (lambda s: s)
    disease = hook(record.fields[disease_column])
    instruction = QUESTION_TEMPLATE.format(disease=disease)
    lines = []
    for column, value in record.fields.items():
        if column == disease_column:
            continue
        value = hook(value)
        if value.strip():
            lines.append(f"{column}: {value}")
    return make_record(
        instruction=instruction,
        output="\n".join(lines),
        source_tag=source_tag or record.source_tag,
    )


# --- Refinement ----------------------------------------------------------


def scrub_pii(text: str) -> tuple[str, bool]:
    """Replace emails and phone-like digit runs with [REDACTED]."""
    changed = False

    def phone_sub(m: re.Match) -> str:
        nonlocal changed
        if sum(c.isdigit() for c in m.group(0)) >= 7:
            changed = True
            return REDACTION
        return m.group(0)

    out, n_email = _EMAIL_RE.subn(REDACTION, text)
    if n_email:
        changed = True
    out = _PHONE_RE.sub(phone_sub, out)
    return out, changed


def refine(
    records: list[InstructionRecord],
    deleted_markers: frozenset[str] | set[str] = DEFAULT_DELETED_MARKERS,
) -> tuple[list[InstructionRecord], RefinementReport]:
    """Filter and clean instruction records.

    Drops records with blank instruction or output, records marked deleted,
    and exact duplicates (first occurrence wins). Emails and phone numbers
    are redacted in place; such records stay but are counted. Ids are
    recomputed from the final content, so the dedup key always matches what
    is stored. Idempotent, and the drop counters plus kept always sum to the
    input size.
    """
    markers = {m.lower() for m in deleted_markers}
    kept: list[InstructionRecord] = []
    seen_ids: set[str] = set()
    n_incomplete = n_deleted = n_scrubbed = n_duplicate = 0
    for rec in records:
        if not rec.instruction.strip() or not rec.output.strip():
            n_incomplete += 1
            continue
        if rec.instruction.strip().lower() in markers or rec.output.strip().lower() in markers:
            n_deleted += 1
            continue
        instruction, ch_i = scrub_pii(rec.instruction)
        input_text, ch_in = scrub_pii(rec.input)
        output, ch_o = scrub_pii(rec.output)
        if ch_i or ch_in or ch_o:
            n_scrubbed += 1
        clean = make_record(instruction, output, rec.source_tag, input_text)
        if clean.id in seen_ids:
            n_duplicate += 1
            continue
        seen_ids.add(clean.id)
        kept.append(clean)
    report = RefinementReport(
        kept=len(kept),
        dropped_incomplete=n_incomplete,
        dropped_deleted=n_deleted,
        dropped_pii_scrubbed=n_scrubbed,
        dropped_duplicate=n_duplicate,
    )
    return kept, report


# --- JSONL ---------------------------------------------------------------


def write_jsonl(records: list[InstructionRecord]) -> bytes:
    """Canonical JSONL: UTF-8, one object per line, fixed key order."""
    lines = []
    for r in records:
        lines.append(
            json.dumps(
                {
                    "instruction": r.instruction,
                    "input": r.input,
                    "output": r.output,
                    "source_tag": r.source_tag,
                    "id": r.id,
                },
                ensure_ascii=False,
            )
        )
    return ("\n".join(lines) + ("\n" if lines else "")).encode("utf-8")


def read_jsonl(data: bytes) -> list[InstructionRecord]:
    records: list[InstructionRecord] = []
    # Split on \n only: values may legally contain exotic line separators
    # (NEL, U+2028) that splitlines() would treat as record boundaries.
    for line_number, line in enumerate(data.decode("utf-8").split("\n"), start=1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedJsonl(line_number, str(exc)) from exc
        if not isinstance(obj, dict):
            raise MalformedJsonl(line_number, "expected a JSON object")
        missing = [k for k in JSONL_KEYS if k not in obj]
        if missing:
            raise MalformedJsonl(line_number, f"missing keys {missing}")
        if not all(isinstance(obj[k], str) for k in JSONL_KEYS):
            raise MalformedJsonl(line_number, "all record values must be strings")
        records.append(
            InstructionRecord(
                id=obj["id"],
                instruction=obj["instruction"],
                input=obj["input"],
                output=obj["output"],
                source_tag=obj["source_tag"],
            )
        )
    return records


# --- Statistics ----------------------------------------------------------


@dataclass(frozen=True)
class SourceCount:
    source_tag: str
    display_name: str
    expected_samples: int | None
    actual: int
    mismatch: bool


@dataclass(frozen=True)
class CorpusStats:
    rows: tuple[SourceCount, ...]
    total: int

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "sources": [
                {
                    "source_tag": r.source_tag,
                    "display_name": r.display_name,
                    "expected_samples": r.expected_samples,
                    "actual": r.actual,
                    "mismatch": r.mismatch,
                }
                for r in self.rows
            ],
        }


def corpus_stats(records: list[InstructionRecord], registry: SourceRegistry | None = None) -> CorpusStats:
    """Per-source record counts, flagged where a registry expectation differs."""
    counts: dict[str, int] = {}
    for r in records:
        counts[r.source_tag] = counts.get(r.source_tag, 0) + 1
    rows: list[SourceCount] = []
    registered: set[str] = set()
    if registry is not None:
        for e in registry.entries:
            registered.add(e.source_tag)
            actual = counts.get(e.source_tag, 0)
            rows.append(
                SourceCount(
                    source_tag=e.source_tag,
                    display_name=e.display_name,
                    expected_samples=e.expected_samples,
                    actual=actual,
                    mismatch=e.expected_samples is not None and e.expected_samples != actual,
                )
            )
    for tag in sorted(counts):
        if tag not in registered:
            rows.append(
                SourceCount(
                    source_tag=tag,
                    display_name=tag,
                    expected_samples=None,
                    actual=counts[tag],
                    mismatch=False,
                )
            )
    return CorpusStats(rows=tuple(rows), total=len(records))
