"""Keyword rules mapping mammography report text to a BI-RADS density category."""

from __future__ import annotations

import csv
import enum
import re
from dataclasses import dataclass
from pathlib import Path

from mrdensity.errors import InputError, UnknownCategoryError


class DensityCategory(enum.IntEnum):
    """Ordinal BI-RADS breast composition; the integer value is the rank."""

    ALMOST_ENTIRELY_FATTY = 1
    SCATTERED_FIBROGLANDULAR = 2
    HETEROGENEOUSLY_DENSE = 3
    EXTREMELY_DENSE = 4

    @property
    def token(self) -> str:
        return _TOKENS[self]

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def from_token(cls, token: str) -> DensityCategory:
        try:
            return _FROM_TOKEN[token.strip()]
        except KeyError:
            raise InputError(
                f"unknown density category {token!r}; expected one of {sorted(_FROM_TOKEN)}"
            ) from None


_TOKENS = {
    DensityCategory.EXTREMELY_DENSE: "extremely_dense",
    DensityCategory.HETEROGENEOUSLY_DENSE: "heterogeneously_dense",
    DensityCategory.SCATTERED_FIBROGLANDULAR: "scattered",
    DensityCategory.ALMOST_ENTIRELY_FATTY: "fatty",
}
_FROM_TOKEN = {v: k for k, v in _TOKENS.items()}
_LABELS = {
    DensityCategory.EXTREMELY_DENSE: "Extremely dense",
    DensityCategory.HETEROGENEOUSLY_DENSE: "Heterogeneously dense",
    DensityCategory.SCATTERED_FIBROGLANDULAR: "Scattered areas of fibroglandular density",
    DensityCategory.ALMOST_ENTIRELY_FATTY: "Almost entirely fatty",
}

# densest family first; the first family with any hit wins
KEYWORDS: tuple[tuple[DensityCategory, tuple[str, ...]], ...] = (
    (DensityCategory.EXTREMELY_DENSE, ("extremely dense", "extremely fibroglandular")),
    (DensityCategory.HETEROGENEOUSLY_DENSE, ("heterogeneously dense", "heterogeneously fibroglandular")),
    (
        DensityCategory.SCATTERED_FIBROGLANDULAR,
        ("scattered fibroglandular", "scattered areas of fibroglandular"),
    ),
    (DensityCategory.ALMOST_ENTIRELY_FATTY, ("entirely fatty", "predominantly fatty")),
)

_WS = re.compile(r"\s+")


def normalize_text(text: str) -> str:
    return _WS.sub(" ", text).strip().lower()


def matched_categories(text: str) -> list[DensityCategory]:
    norm = normalize_text(text)
    return [cat for cat, phrases in KEYWORDS if any(p in norm for p in phrases)]


def parse_density_category(report_text: str) -> DensityCategory:
    """Category of a report by case-insensitive keyword match.

    When several families match, the densest wins. Negations such as
    "not extremely dense" are not recognized.
    """
    if not report_text or not report_text.strip():
        raise InputError("report text is empty")
    hits = matched_categories(report_text)
    if not hits:
        raise UnknownCategoryError("no density keyword found in report")
    return hits[0]


@dataclass(frozen=True)
class ParsedReport:
    subject_id: str
    category: DensityCategory | None
    reason: str = ""


def read_corpus(path: str | Path) -> list[tuple[str, str]]:
    """(subject_id, text) pairs from a directory of ``.txt`` files or a CSV.

    Directory entries use the file stem as subject id. A CSV must have the
    header ``subject_id,report_text``.
    """
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.is_file() and p.suffix.lower() == ".txt")
        return [(p.stem, p.read_text(encoding="utf-8")) for p in files]
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"subject_id", "report_text"} <= set(reader.fieldnames):
            raise InputError(f"{path}: expected header subject_id,report_text")
        return [(row["subject_id"], row["report_text"] or "") for row in reader]


def parse_corpus(reports: list[tuple[str, str]]) -> list[ParsedReport]:
    out = []
    for subject_id, text in reports:
        try:
            out.append(ParsedReport(subject_id, parse_density_category(text)))
        except InputError as exc:
            out.append(ParsedReport(subject_id, None, str(exc)))
    return out
