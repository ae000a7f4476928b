"""Listings and per-mask CSV export.

A listing resolves every entry of one mask into human-readable cells:
code values become their translated texts, cross-links the target's
representative text plus key, timestamps ISO-8601. Export writes the same
resolved table, one CSV file per mask, with the two key columns appended,
quoted per RFC 4180 with CRLF line ends.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from . import book as bookmod
from .book import BookError
from .model import Entry, GlobalKey
from .client.store import LocalStore


@dataclass
class Listing:
    mask: str
    columns: list[str]
    rows: list["ListingRow"]


@dataclass
class ListingRow:
    key: GlobalKey
    cells: list[str]


def list_entries(store: LocalStore, mask: str, project: GlobalKey,
                 language: str = "en",
                 entry_filter: Callable[[Entry], bool] | None = None) -> Listing:
    """Resolved table of one mask's visible entries, ordered by key.
    Tombstones never appear."""
    mask_def = store.book.mask(mask)
    tables = store.code_tables()
    rows = []
    for entry in store.entries(mask=mask, project=project):
        if entry_filter is not None and not entry_filter(entry):
            continue
        pairs = bookmod.resolve_display(entry, mask_def, tables, language,
                                        link_display=store.link_display)
        rows.append(ListingRow(entry.key, [text for _, text in pairs]))
    return Listing(mask, mask_def.field_names(), rows)


# -- CSV writing (RFC 4180: CRLF ends, quotes doubled, quote when a cell
# holds comma, quote, or a line break) ---------------------------------------


def _csv_cell(text: str) -> str:
    if any(c in text for c in ',"\r\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _csv_line(cells: list[str]) -> str:
    return ",".join(_csv_cell(c) for c in cells) + "\r\n"


def export_project(store: LocalStore, project: GlobalKey, masks: list[str],
                   directory: str | Path, language: str = "en") -> list[Path]:
    """One CSV file per selected mask, named <project>_<mask>.csv, UTF-8.
    Header row: field names plus _id and _dbid."""
    if not masks:
        raise BookError("no masks selected for export")
    directory = Path(directory)
    if not directory.is_dir():
        raise BookError(f"not a writable directory: {directory}")
    known = store.get_project(project)
    project_name = known.name if known else f"project-{project.id}-{project.dbid}"

    written = []
    for mask in masks:
        listing = list_entries(store, mask, project, language)
        out = [_csv_line(listing.columns + ["_id", "_dbid"])]
        for row in listing.rows:
            out.append(_csv_line(row.cells + [str(row.key.id), str(row.key.dbid)]))
        path = directory / f"{project_name}_{mask}.csv"
        path.write_bytes("".join(out).encode("utf-8"))
        written.append(path)
    return written
