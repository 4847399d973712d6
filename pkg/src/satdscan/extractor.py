"""Comment extraction with exact file/line provenance.

A small state machine per file tracks only strings and comments (never
grammar), so markers inside string literals are never treated as comments.
Block comments spanning N lines collapse to one comment; maximal runs of
contiguous full-line comments with the same marker merge into one
``merged-line-group`` comment.
"""

from __future__ import annotations

import enum
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

from satdscan.languages import SourceLanguage, detect_language


class CommentKind(enum.Enum):
    LINE = "line"
    BLOCK = "block"
    MERGED = "merged-line-group"


@dataclass(frozen=True)
class SourceComment:
    repo: str
    file_path: str
    line_start: int
    line_end: int
    language: str
    kind: CommentKind
    raw_text: str

    def __post_init__(self):
        if self.line_start < 1 or self.line_end < self.line_start:
            raise ValueError(
                f"bad line span {self.line_start}..{self.line_end} in {self.file_path}"
            )
        if self.kind is CommentKind.MERGED and self.line_end == self.line_start:
            raise ValueError("merged-line-group spans at least two lines")

    def to_record(self) -> dict:
        """JSONL record schema: {repo, file, line_start, line_end, language, kind, raw_text}."""
        return {
            "repo": self.repo,
            "file": self.file_path,
            "line_start": self.line_start,
            "line_end": self.line_end,
            "language": self.language,
            "kind": self.kind.value,
            "raw_text": self.raw_text,
        }


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    file: str
    line: int
    message: str


_POD_OPEN = re.compile(r"=[A-Za-z]\w*")


@dataclass
class _LineEvent:
    line: int
    text: str
    marker: str
    ws_prefix: bool  # only whitespace before the marker on this line


def _join_block_lines(interior: str) -> str:
    parts = [ln.strip() for ln in interior.splitlines()]
    return " ".join(p for p in parts if p)


class _Lexer:
    """Single-pass scanner producing comment events in source order."""

    def __init__(self, text: str, language: SourceLanguage, file_path: str, repo: str):
        self.text = text
        self.lang = language
        self.file_path = file_path
        self.repo = repo
        self.i = 0
        self.line = 1
        self.line_start_offset = 0
        self.events: list = []  # _LineEvent | SourceComment (block)
        self.diagnostics: list[Diagnostic] = []

    def _startswith(self, token: str) -> bool:
        return self.text.startswith(token, self.i)

    def _advance(self, n: int = 1):
        for _ in range(n):
            if self.i < len(self.text) and self.text[self.i] == "\n":
                self.line += 1
                self.line_start_offset = self.i + 1
            self.i += 1

    def _ws_prefix(self, marker_pos: int) -> bool:
        return self.text[self.line_start_offset:marker_pos].strip() == ""

    def run(self):
        if self.lang.column1_markers:
            self._run_fixed_form()
        else:
            self._run_stream()
        return self.events, self.diagnostics

    # Fixed-form Fortran: the comment marker is positional (column 1), so a
    # per-line scan is the whole lexer.
    def _run_fixed_form(self):
        for lineno, raw_line in enumerate(self.text.splitlines(), start=1):
            if raw_line and raw_line[0] in self.lang.column1_markers:
                self.events.append(
                    _LineEvent(
                        line=lineno,
                        text=raw_line[1:].strip(),
                        marker=raw_line[0].lower(),
                        ws_prefix=True,
                    )
                )

    def _run_stream(self):
        text, n = self.text, len(self.text)
        while self.i < n:
            if self.lang.pod_blocks and self.i == self.line_start_offset:
                m = _POD_OPEN.match(text, self.i)
                if m:
                    self._consume_pod(m.group(0))
                    continue
            ch = text[self.i]
            rule = self._match_string_open()
            if rule is not None:
                self._consume_string(rule)
                continue
            block = self._match_block_open()
            if block is not None:
                self._consume_block(*block)
                continue
            marker = self._match_line_marker()
            if marker is not None:
                self._consume_line_comment(marker)
                continue
            self._advance()

    def _match_string_open(self) -> Optional[object]:
        for rule in self.lang.string_rules:
            if self._startswith(rule.open):
                return rule
        return None

    def _match_block_open(self):
        for open_tok, close_tok in self.lang.block_delimiters:
            if self._startswith(open_tok):
                return open_tok, close_tok
        return None

    def _match_line_marker(self) -> Optional[str]:
        for marker in self.lang.line_markers:
            if self._startswith(marker):
                return marker
        return None

    def _consume_line_comment(self, marker: str):
        pos = self.i
        ws = self._ws_prefix(pos)
        end = self.text.find("\n", pos)
        if end == -1:
            end = len(self.text)
        body = self.text[pos + len(marker):end].rstrip("\r")
        self.events.append(_LineEvent(self.line, body.strip(), marker, ws))
        self._advance(end - self.i)  # leave the newline for the main loop

    def _consume_block(self, open_tok: str, close_tok: str):
        start_line = self.line
        self._advance(len(open_tok))
        close = self.text.find(close_tok, self.i)
        if close == -1:
            interior = self.text[self.i:]
            self._advance(len(self.text) - self.i)
            self.diagnostics.append(
                Diagnostic("unterminated-block-comment", self.file_path, start_line,
                           f"block comment opened at line {start_line} never closed")
            )
            end_line = self.line
        else:
            interior = self.text[self.i:close]
            self._advance(close - self.i + len(close_tok))
            end_line = self.line
        self.events.append(
            SourceComment(self.repo, self.file_path, start_line, end_line,
                          self.lang.name, CommentKind.BLOCK, _join_block_lines(interior))
        )

    def _consume_pod(self, open_tok: str):
        start_line = self.line
        text = self.text
        line_end = text.find("\n", self.i)
        if line_end == -1:
            line_end = len(text)
        first = text[self.i + len(open_tok):line_end].strip()
        lines = [first] if first else []
        self._advance(line_end - self.i)
        closed = False
        while self.i < len(text):
            self._advance()  # step over the newline
            line_end = text.find("\n", self.i)
            if line_end == -1:
                line_end = len(text)
            line = text[self.i:line_end]
            if line.strip().startswith("=cut"):
                self._advance(line_end - self.i)
                closed = True
                break
            stripped = line.strip()
            if stripped:
                lines.append(stripped)
            self._advance(line_end - self.i)
        if not closed:
            self.diagnostics.append(
                Diagnostic("unterminated-block-comment", self.file_path, start_line,
                           f"doc block opened at line {start_line} has no =cut")
            )
        self.events.append(
            SourceComment(self.repo, self.file_path, start_line, self.line,
                          self.lang.name, CommentKind.BLOCK, " ".join(lines))
        )

    def _consume_string(self, rule):
        start_line = self.line
        self._advance(len(rule.open))
        text, n = self.text, len(self.text)
        while self.i < n:
            if rule.escape == "backslash" and text[self.i] == "\\":
                self._advance(2)
                continue
            if self._startswith(rule.close):
                if rule.escape == "double" and text.startswith(rule.close * 2, self.i):
                    self._advance(len(rule.close) * 2)
                    continue
                self._advance(len(rule.close))
                return
            if text[self.i] == "\n" and not rule.multiline:
                self.diagnostics.append(
                    Diagnostic("unterminated-string", self.file_path, self.line,
                               f"string opened at line {self.line} not closed before end of line")
                )
                self._advance()  # resume at next line
                return
            self._advance()
        self.diagnostics.append(
            Diagnostic("unterminated-string", self.file_path, start_line,
                       f"string opened at line {start_line} not closed before end of file")
        )


def _merge_events(events, language: SourceLanguage, file_path: str, repo: str) -> list[SourceComment]:
    comments: list[SourceComment] = []
    run: list[_LineEvent] = []

    def flush():
        if not run:
            return
        if len(run) == 1:
            ev = run[0]
            comments.append(SourceComment(repo, file_path, ev.line, ev.line,
                                          language.name, CommentKind.LINE, ev.text))
        else:
            text = " ".join(ev.text for ev in run if ev.text)
            comments.append(SourceComment(repo, file_path, run[0].line, run[-1].line,
                                          language.name, CommentKind.MERGED, text))
        run.clear()

    for ev in events:
        if isinstance(ev, SourceComment):
            flush()
            comments.append(ev)
            continue
        mergeable = ev.ws_prefix
        if run and (not mergeable or ev.marker != run[-1].marker or ev.line != run[-1].line + 1):
            flush()
        if mergeable:
            run.append(ev)
        else:
            comments.append(SourceComment(repo, file_path, ev.line, ev.line,
                                          language.name, CommentKind.LINE, ev.text))
    flush()
    return comments


def extract_comments(
    file_text: str,
    language: SourceLanguage,
    file_path,
    repo: str = "",
    diagnostics: Optional[list[Diagnostic]] = None,
) -> list[SourceComment]:
    """All comments of one file, in source order.

    Lexer diagnostics (unterminated blocks/strings) are appended to the
    optional ``diagnostics`` sink; the scan itself never raises for them.
    """
    path = str(file_path)
    events, diags = _Lexer(file_text, language, path, repo).run()
    if diagnostics is not None:
        diagnostics.extend(diags)
    return _merge_events(events, language, path, repo)


DEFAULT_IGNORE_DIRS = frozenset({
    ".git", ".hg", ".svn", "node_modules", "vendor", "third_party",
    "thirdparty", "__pycache__", ".tox", ".venv",
})


@dataclass(frozen=True)
class ScanConfig:
    repo_name: str = ""
    ignore_dirs: frozenset[str] = DEFAULT_IGNORE_DIRS
    languages: Optional[frozenset[str]] = None  # None = all supported
    jobs: int = 1

    def __post_init__(self):
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")


def _iter_source_files(root: Path, config: ScanConfig):
    for dirpath, dirnames, filenames in os.walk(root):
        dirnames[:] = sorted(d for d in dirnames if d not in config.ignore_dirs)
        for name in sorted(filenames):
            path = Path(dirpath) / name
            lang = detect_language(path)
            if lang is None:
                continue
            if config.languages is not None and lang.name not in config.languages:
                continue
            yield path, lang


def _extract_file(path: Path, lang: SourceLanguage, root: Path, repo: str):
    rel = path.relative_to(root).as_posix()
    diags: list[Diagnostic] = []
    try:
        text = path.read_bytes().decode("utf-8", errors="replace")
    except OSError as exc:
        return [], [Diagnostic("unreadable-file", rel, 0, str(exc))]
    return extract_comments(text, lang, rel, repo=repo, diagnostics=diags), diags


def scan_repository(
    root,
    config: ScanConfig = ScanConfig(),
    diagnostics: Optional[list[Diagnostic]] = None,
) -> Iterator[SourceComment]:
    """Walk a source tree and yield comments in deterministic order.

    Directories and file names are visited sorted; within a file, comments
    come out in line order. Files may be lexed concurrently (config.jobs),
    but emission order never depends on the parallelism.
    Unreadable files are reported to the sink and skipped; the scan never
    aborts as a whole.
    """
    root = Path(root)
    if not root.is_dir():
        raise NotADirectoryError(f"{root} is not a scannable directory")
    repo = config.repo_name or root.name
    files = list(_iter_source_files(root, config))

    if config.jobs == 1:
        results = (_extract_file(path, lang, root, repo) for path, lang in files)
    else:
        pool = ThreadPoolExecutor(max_workers=config.jobs)
        futures = [pool.submit(_extract_file, path, lang, root, repo) for path, lang in files]
        results = (f.result() for f in futures)

    try:
        for comments, diags in results:
            if diagnostics is not None:
                diagnostics.extend(diags)
            yield from comments
    finally:
        if config.jobs > 1:
            pool.shutdown(wait=False)
