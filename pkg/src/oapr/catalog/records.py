"""Attribute catalog: verbalization rules, filtering, and the retained record set."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from oapr.errors import EmptyPhrase, UnmappedAttribute

DROP_MARKER = "DROP"


@dataclass(frozen=True)
class AttributeRecord:
    """One retained attribute with its natural-language phrase and body parts."""

    raw_name: str
    phrase: str
    body_parts: tuple[int, ...]
    category_hint: str | None = None


@dataclass(frozen=True)
class AttributeCatalog:
    records: tuple[AttributeRecord, ...]
    dataset_name: str
    filtered_out: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.records)

    @property
    def raw_names(self) -> tuple[str, ...]:
        return tuple(r.raw_name for r in self.records)

    @property
    def phrases(self) -> tuple[str, ...]:
        return tuple(r.phrase for r in self.records)

    def record_for(self, raw_name: str) -> AttributeRecord:
        for r in self.records:
            if r.raw_name == raw_name:
                return r
        raise KeyError(raw_name)

    def to_json(self) -> str:
        obj = {
            "dataset_name": self.dataset_name,
            "filtered_out": list(self.filtered_out),
            "records": [
                {
                    "raw_name": r.raw_name,
                    "phrase": r.phrase,
                    "body_parts": list(r.body_parts),
                }
                for r in self.records
            ],
        }
        return json.dumps(obj, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "AttributeCatalog":
        obj = json.loads(text)
        records = tuple(
            AttributeRecord(
                raw_name=r["raw_name"],
                phrase=r["phrase"],
                body_parts=tuple(int(b) for b in r["body_parts"]),
            )
            for r in obj["records"]
        )
        return cls(
            records=records,
            dataset_name=obj["dataset_name"],
            filtered_out=tuple(obj["filtered_out"]),
        )


@dataclass(frozen=True)
class VerbalizationRule:
    """Either a phrase plus body-part ids, or an explicit drop."""

    phrase: str | None  # None means DROP
    body_parts: tuple[int, ...]

    @property
    def dropped(self) -> bool:
        return self.phrase is None


def parse_rules(text: str) -> dict[str, VerbalizationRule]:
    """Parse a verbalization table.

    One record per line: ``raw_name<TAB>phrase_or_DROP<TAB>comma-separated-body-part-ids``.
    The body-part column may be empty for DROP rows. Blank lines and ``#`` comments
    are skipped.
    """
    rules: dict[str, VerbalizationRule] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise ValueError(f"rules line {lineno}: expected at least 2 tab-separated fields")
        raw_name = parts[0].strip()
        if not raw_name:
            raise ValueError(f"rules line {lineno}: empty raw name")
        if raw_name in rules:
            raise ValueError(f"rules line {lineno}: duplicate rule for {raw_name!r}")
        phrase = parts[1].strip()
        if phrase == DROP_MARKER:
            rules[raw_name] = VerbalizationRule(phrase=None, body_parts=())
            continue
        if not phrase:
            raise EmptyPhrase(f"rule for {raw_name!r} maps to blank text")
        body_field = parts[2].strip() if len(parts) > 2 else ""
        if not body_field:
            raise ValueError(f"rules line {lineno}: retained attribute {raw_name!r} has no body parts")
        body_parts = tuple(sorted({int(b) for b in body_field.split(",") if b.strip()}))
        if not body_parts:
            raise ValueError(f"rules line {lineno}: retained attribute {raw_name!r} has no body parts")
        rules[raw_name] = VerbalizationRule(phrase=phrase, body_parts=body_parts)
    return rules


def load_rules(path: str | Path) -> dict[str, VerbalizationRule]:
    return parse_rules(Path(path).read_text(encoding="utf-8"))


def filter_and_verbalize(
    raw_names: list[str],
    rules: dict[str, VerbalizationRule],
    dataset_name: str = "",
) -> AttributeCatalog:
    """Apply the rules table: drop marked attributes, verbalize the rest.

    Every raw name must have a rule; silent guessing is not allowed. Record
    order is lexicographic by raw name so downstream indices are stable.
    """
    retained: list[AttributeRecord] = []
    filtered_out: list[str] = []
    seen: set[str] = set()
    for raw_name in raw_names:
        if raw_name in seen:
            raise ValueError(f"duplicate raw attribute name {raw_name!r}")
        seen.add(raw_name)
        rule = rules.get(raw_name)
        if rule is None:
            raise UnmappedAttribute(raw_name)
        if rule.dropped:
            filtered_out.append(raw_name)
            continue
        if not rule.phrase or not rule.phrase.strip():
            raise EmptyPhrase(f"rule for {raw_name!r} maps to blank text")
        retained.append(
            AttributeRecord(raw_name=raw_name, phrase=rule.phrase, body_parts=rule.body_parts)
        )
    retained.sort(key=lambda r: r.raw_name)
    filtered_out.sort()
    return AttributeCatalog(
        records=tuple(retained),
        dataset_name=dataset_name,
        filtered_out=tuple(filtered_out),
    )
