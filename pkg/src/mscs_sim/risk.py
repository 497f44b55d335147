"""Risk assessment: criterion ratings, the majority rule, and a label audit.

Every attack is rated High/Medium/Low on reproducibility, impact and
stealthiness. The overall rating is the majority value among the three; a
triple with all three values distinct collapses to Medium. The published
labels are preserved as data even where they disagree with the rule, and the
audit reports those rows as discrepancies instead of silently correcting
them.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence


class CriterionRating(Enum):
    HIGH = "High"
    MEDIUM = "Medium"
    LOW = "Low"

    def __lt__(self, other: "CriterionRating") -> bool:
        order = {CriterionRating.LOW: 0, CriterionRating.MEDIUM: 1,
                 CriterionRating.HIGH: 2}
        return order[self] < order[other]


@dataclass(frozen=True)
class RiskAssessment:
    reproducibility: CriterionRating
    impact: CriterionRating
    stealthiness: CriterionRating
    overall: CriterionRating
    paper_label: CriterionRating


class CatalogSizeMismatch(Exception):
    pass


def overall_rating(reproducibility: CriterionRating, impact: CriterionRating,
                   stealthiness: CriterionRating) -> CriterionRating:
    """Majority of the three criteria; all-distinct triples give Medium."""
    triple = (reproducibility, impact, stealthiness)
    for value in triple:
        if triple.count(value) >= 2:
            return value
    return CriterionRating.MEDIUM


@dataclass(frozen=True)
class AuditRow:
    attack: str
    reproducibility: CriterionRating
    impact: CriterionRating
    stealthiness: CriterionRating
    rule_overall: CriterionRating
    paper_label: CriterionRating

    @property
    def discrepant(self) -> bool:
        return self.rule_overall != self.paper_label


@dataclass(frozen=True)
class AuditResult:
    rows: tuple[AuditRow, ...]
    distribution: dict[str, int]
    discrepancies: tuple[str, ...]


def audit_rows(catalog: Iterable) -> AuditResult:
    """Apply the rating rule to catalog rows and diff against their labels."""
    rows = []
    for entry in catalog:
        rule = overall_rating(entry.reproducibility, entry.impact,
                              entry.stealthiness)
        rows.append(AuditRow(
            attack=entry.attack_id.value,
            reproducibility=entry.reproducibility,
            impact=entry.impact,
            stealthiness=entry.stealthiness,
            rule_overall=rule,
            paper_label=entry.overall_label))
    distribution = {r.value: 0 for r in
                    (CriterionRating.HIGH, CriterionRating.MEDIUM,
                     CriterionRating.LOW)}
    for row in rows:
        distribution[row.paper_label.value] += 1
    discrepancies = tuple(row.attack for row in rows if row.discrepant)
    return AuditResult(rows=tuple(rows), distribution=distribution,
                       discrepancies=discrepancies)


def audit_catalog(catalog: Sequence, require_full: bool = True) -> AuditResult:
    """Audit the attack catalog; the full catalog must hold 16 entries."""
    if require_full and len(catalog) != 16:
        raise CatalogSizeMismatch(f"expected 16 catalog rows, got {len(catalog)}")
    return audit_rows(catalog)


def assessment_of(entry) -> RiskAssessment:
    return RiskAssessment(
        reproducibility=entry.reproducibility,
        impact=entry.impact,
        stealthiness=entry.stealthiness,
        overall=overall_rating(entry.reproducibility, entry.impact,
                               entry.stealthiness),
        paper_label=entry.overall_label)


def render_report(audit: AuditResult, fmt: str = "table") -> str:
    """Render the audit as an aligned table or as JSON-lines records."""
    if fmt == "records":
        import json

        out = io.StringIO()
        for row in audit.rows:
            out.write(json.dumps({
                "attack": row.attack,
                "reproducibility": row.reproducibility.value,
                "impact": row.impact.value,
                "stealthiness": row.stealthiness.value,
                "rule_overall": row.rule_overall.value,
                "published_label": row.paper_label.value,
                "discrepant": row.discrepant,
            }, sort_keys=True) + "\n")
        out.write(json.dumps({
            "distribution": audit.distribution,
            "discrepancies": list(audit.discrepancies),
        }, sort_keys=True) + "\n")
        return out.getvalue()
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")

    header = (f"{'attack':<8}{'repro':<8}{'impact':<8}{'stealth':<8}"
              f"{'rule':<8}{'label':<8}flag")
    lines = [header, "-" * len(header)]
    for row in audit.rows:
        flag = "DISCREPANT" if row.discrepant else ""
        lines.append(
            f"{row.attack:<8}{row.reproducibility.value:<8}"
            f"{row.impact.value:<8}{row.stealthiness.value:<8}"
            f"{row.rule_overall.value:<8}{row.paper_label.value:<8}{flag}")
    lines.append("")
    dist = ", ".join(f"{k}: {v}" for k, v in audit.distribution.items())
    lines.append(f"label distribution: {dist}")
    if audit.discrepancies:
        lines.append("rule/label discrepancies: "
                     + ", ".join(audit.discrepancies))
    else:
        lines.append("no discrepancies")
    return "\n".join(lines) + "\n"
