"""Whole-repository analysis: extract, normalize, classify, tally.

Reports follow the published results-table layout (columns Repo Name,
Repo Domain, Total SATD, Non SATD, DOC, REQ, TES, C/D, SCI, %SCI,
%SATD). Percentages are kept at full precision internally and rounded
to two decimals only when rendering.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
from dataclasses import dataclass, field
from typing import Optional

from satdscan.classifier import Classifier, classify
from satdscan.extractor import Diagnostic, ScanConfig, scan_repository
from satdscan.labels import LABEL_ORDER, SATD_LABELS, Label
from satdscan.preprocess import NO_STOP_WORDS, StopWordPolicy, normalize


class IncompleteScan(RuntimeError):
    pass


class EmptyCohort(ValueError):
    pass


class DivisionByZero(ZeroDivisionError):
    pass


class MissingField(KeyError):
    def __init__(self, name: str):
        super().__init__(name)
        self.field = name

    def __str__(self):
        return f"repo metadata is missing field {self.field!r}"


@dataclass(frozen=True)
class SatdInstance:
    file_path: str
    line_start: int
    line_end: int
    label: Label
    score: float
    excerpt: str

    def __post_init__(self):
        if self.label is Label.NON_SATD:
            raise ValueError("SATD instances cannot carry the NonSatd label")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score out of [0,1]: {self.score}")
        if len(self.excerpt) > 120:
            raise ValueError("excerpt is capped at 120 characters")

    def to_record(self) -> dict:
        return {
            "file": self.file_path,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "label": self.label.value,
            "score": self.score,
        }


@dataclass(frozen=True)
class RepoReport:
    repo_name: str
    domain_tag: str
    counts: dict
    # None = counts-only report (e.g. transcribed tallies); analyze_repo
    # always records instances, and then their number must equal total_satd.
    instances: Optional[tuple] = None
    incomplete: bool = False

    def __post_init__(self):
        if set(self.counts.keys()) != set(LABEL_ORDER):
            raise ValueError("counts must cover exactly the six labels")
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("counts must be non-negative")
        if self.instances is not None and len(self.instances) != self.total_satd:
            raise ValueError(
                f"{len(self.instances)} instances recorded for {self.total_satd} SATD comments"
            )

    @property
    def total_satd(self) -> int:
        return sum(self.counts[label] for label in SATD_LABELS)

    @property
    def total_comments(self) -> int:
        return self.total_satd + self.counts[Label.NON_SATD]

    @property
    def is_empty(self) -> bool:
        return self.total_comments == 0 and not self.incomplete

    def _pct(self, numerator: int) -> float:
        if self.incomplete:
            raise IncompleteScan(
                f"scan of {self.repo_name!r} was incomplete; percentages withheld"
            )
        if self.total_comments == 0:
            return 0.0
        return 100.0 * numerator / self.total_comments

    @property
    def pct_sci(self) -> float:
        return self._pct(self.counts[Label.SCIENTIFIC])

    @property
    def pct_satd(self) -> float:
        return self._pct(self.total_satd)

    def to_json(self) -> dict:
        return {
            "repo_name": self.repo_name,
            "domain_tag": self.domain_tag,
            "counts": {label.value: self.counts[label] for label in LABEL_ORDER},
            "total_satd": self.total_satd,
            "total_comments": self.total_comments,
            "pct_sci": None if self.incomplete else self.pct_sci,
            "pct_satd": None if self.incomplete else self.pct_satd,
            "incomplete": self.incomplete,
            "instances": None if self.instances is None else [
                {**inst.to_record(), "excerpt": inst.excerpt} for inst in self.instances
            ],
        }


@dataclass(frozen=True)
class AnalyzeConfig:
    repo_name: str = ""
    domain_tag: str = ""
    scan: ScanConfig = ScanConfig()
    stop_words: StopWordPolicy = NO_STOP_WORDS


def analyze_repo(root, backend: Classifier,
                 config: AnalyzeConfig = AnalyzeConfig(),
                 diagnostics: Optional[list] = None) -> RepoReport:
    """Scan root, classify every comment, and tally a RepoReport.

    Comments whose text normalizes to empty carry no classifiable signal
    and are excluded from total_comments. A report is marked incomplete
    when any source file could not be read; incomplete reports refuse
    percentage computation.
    """
    diags: list[Diagnostic] = []
    scan_config = config.scan
    if config.repo_name and not scan_config.repo_name:
        scan_config = ScanConfig(repo_name=config.repo_name,
                                 ignore_dirs=scan_config.ignore_dirs,
                                 languages=scan_config.languages,
                                 jobs=scan_config.jobs)
    comments = list(scan_repository(root, scan_config, diagnostics=diags))
    if diagnostics is not None:
        diagnostics.extend(diags)

    kept = []
    texts = []
    for comment in comments:
        text = normalize(comment.raw_text, config.stop_words)
        if text is None:
            continue
        kept.append(comment)
        texts.append(text)

    results = classify(texts, backend)
    counts = {label: 0 for label in LABEL_ORDER}
    instances = []
    for comment, result in zip(kept, results):
        counts[result.label] += 1
        if result.label is not Label.NON_SATD:
            instances.append(SatdInstance(
                file_path=comment.file_path,
                line_start=comment.line_start,
                line_end=comment.line_end,
                label=result.label,
                score=float(result.scores[result.label]),
                excerpt=comment.raw_text[:120],
            ))

    repo_name = config.repo_name or scan_config.repo_name or str(root)
    incomplete = any(d.kind == "unreadable-file" for d in diags)
    return RepoReport(repo_name=repo_name, domain_tag=config.domain_tag,
                      counts=counts, instances=tuple(instances),
                      incomplete=incomplete)


@dataclass(frozen=True)
class CohortReport:
    repos: tuple

    def __post_init__(self):
        if not self.repos:
            raise EmptyCohort("a cohort needs at least one repo report")

    @property
    def totals(self) -> dict:
        totals = {label: 0 for label in LABEL_ORDER}
        for report in self.repos:
            for label in LABEL_ORDER:
                totals[label] += report.counts[label]
        return totals

    @property
    def total_comments(self) -> int:
        return sum(r.total_comments for r in self.repos)

    @property
    def avg_pct_sci(self) -> float:
        return sum(r.pct_sci for r in self.repos) / len(self.repos)

    @property
    def avg_pct_satd(self) -> float:
        return sum(r.pct_satd for r in self.repos) / len(self.repos)

    def to_json(self) -> dict:
        return {
            "repos": [r.to_json() for r in self.repos],
            "totals": {label.value: c for label, c in self.totals.items()},
            "total_comments": self.total_comments,
            "avg_pct_sci": self.avg_pct_sci,
            "avg_pct_satd": self.avg_pct_satd,
        }


def cohort_report(reports: list) -> CohortReport:
    """Aggregate per-repo reports; averages are unweighted column means."""
    return CohortReport(repos=tuple(reports))


@dataclass(frozen=True)
class CohortComparison:
    ratio_sci: float
    ratio_satd: float
    label_rate_ratios: dict

    def to_json(self) -> dict:
        return {
            "ratio_sci": self.ratio_sci,
            "ratio_satd": self.ratio_satd,
            "label_rate_ratios": {
                label.value: ratio for label, ratio in self.label_rate_ratios.items()
            },
        }


def compare_cohorts(a: CohortReport, b: CohortReport) -> CohortComparison:
    """Ratios of cohort a over cohort b.

    Headline ratios divide the average percentages; per-label ratios
    divide comment rates (label total / cohort total_comments). Labels
    whose denominator rate is zero are omitted from label_rate_ratios.
    """
    if b.avg_pct_sci == 0 or b.avg_pct_satd == 0:
        raise DivisionByZero("cohort b has a zero average percentage")
    ratios = {}
    totals_a, totals_b = a.totals, b.totals
    for label in LABEL_ORDER:
        rate_a = totals_a[label] / a.total_comments if a.total_comments else 0.0
        rate_b = totals_b[label] / b.total_comments if b.total_comments else 0.0
        if rate_b > 0:
            ratios[label] = rate_a / rate_b
    return CohortComparison(
        ratio_sci=a.avg_pct_sci / b.avg_pct_sci,
        ratio_satd=a.avg_pct_satd / b.avg_pct_satd,
        label_rate_ratios=ratios,
    )


@dataclass(frozen=True)
class SelectionCriteria:
    min_stars: int = 40
    min_contributors: int = 15
    updated_after: datetime.date = datetime.date(2023, 1, 1)

    def __post_init__(self):
        if self.min_stars < 0 or self.min_contributors < 0:
            raise ValueError("selection thresholds must be non-negative")


@dataclass(frozen=True)
class SelectionResult:
    passed: bool
    failures: tuple


def check_selection(metadata: dict, criteria: SelectionCriteria = SelectionCriteria()) -> SelectionResult:
    """Check one repo metadata record against the selection thresholds.

    metadata needs keys stars, contributors, last_update (ISO date). The
    record can come from any source; metadata_from_file reads the local
    JSON layout used by tests.
    """
    for name in ("stars", "contributors", "last_update"):
        if name not in metadata:
            raise MissingField(name)
    last_update = metadata["last_update"]
    if isinstance(last_update, str):
        last_update = datetime.date.fromisoformat(last_update)
    failures = []
    if metadata["stars"] < criteria.min_stars:
        failures.append("min_stars")
    if metadata["contributors"] < criteria.min_contributors:
        failures.append("min_contributors")
    if last_update < criteria.updated_after:
        failures.append("updated_after")
    return SelectionResult(passed=not failures, failures=tuple(failures))


def metadata_from_file(path, repo_name: Optional[str] = None) -> dict:
    """Load a metadata record from a local JSON file.

    The file holds either a single record or a {repo_name: record} map;
    pass repo_name to pick from a map.
    """
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if repo_name is not None:
        if repo_name not in data:
            raise KeyError(f"no metadata for repo {repo_name!r} in {path}")
        return data[repo_name]
    return data


# Results-table column order: count columns then percentage columns.
TABLE_LABELS = (
    ("DOC", Label.DOCUMENTATION),
    ("REQ", Label.REQUIREMENT),
    ("TES", Label.TEST),
    ("C/D", Label.CODE_DESIGN),
    ("SCI", Label.SCIENTIFIC),
)
TABLE_HEADER = ("Repo Name", "Repo Domain", "Total SATD", "Non SATD",
                "DOC", "REQ", "TES", "C/D", "SCI", "%SCI", "%SATD")


def _table_row(report: RepoReport) -> list:
    row = [report.repo_name, report.domain_tag,
           str(report.total_satd), str(report.counts[Label.NON_SATD])]
    row += [str(report.counts[label]) for _, label in TABLE_LABELS]
    row += [f"{report.pct_sci:.2f}", f"{report.pct_satd:.2f}"]
    return row


def render_markdown(cohort: CohortReport) -> str:
    """Markdown results table; the totals row carries starred column
    averages in the percentage columns."""
    lines = [
        "| " + " | ".join(TABLE_HEADER) + " |",
        "| " + " | ".join("---" for _ in TABLE_HEADER) + " |",
    ]
    for report in cohort.repos:
        lines.append("| " + " | ".join(_table_row(report)) + " |")
    totals = cohort.totals
    total_satd = sum(totals[label] for label in SATD_LABELS)
    totals_row = ["Total", "", str(total_satd), str(totals[Label.NON_SATD])]
    totals_row += [str(totals[label]) for _, label in TABLE_LABELS]
    totals_row += [f"{cohort.avg_pct_sci:.2f}*", f"{cohort.avg_pct_satd:.2f}*"]
    lines.append("| " + " | ".join(totals_row) + " |")
    return "\n".join(lines)


def render_csv(cohort: CohortReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TABLE_HEADER)
    for report in cohort.repos:
        writer.writerow(_table_row(report))
    return buf.getvalue()


def sarif_records(report: RepoReport) -> list:
    """Editor-integration records: {file, line_start, line_end, label, score}."""
    if report.instances is None:
        raise IncompleteScan(f"{report.repo_name}: no instances recorded")
    return [inst.to_record() for inst in report.instances]
