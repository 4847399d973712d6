"""Supported source languages: comment markers, string quoting rules, and the
file-extension table that selects them.

Lexing depth is deliberately shallow: only string and comment states are
modeled, never grammar. Fortran is one language with two marker dialects
chosen by extension (fixed-form column-1 markers for .f/.for/.f77, free-form
``!`` for .f90/.f95/.f03/.f08).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field


@dataclass(frozen=True)
class StringRule:
    """One quoting form. escape: 'backslash', 'double' (doubled quote), or 'none'."""

    open: str
    close: str
    escape: str = "backslash"
    multiline: bool = False


@dataclass(frozen=True)
class SourceLanguage:
    name: str
    line_markers: tuple[str, ...] = ()
    block_delimiters: tuple[tuple[str, str], ...] = ()
    string_rules: tuple[StringRule, ...] = ()
    # Fixed-form Fortran: these characters in column 1 comment the whole line.
    column1_markers: tuple[str, ...] = ()
    # Perl: "=word" at column 0 opens a doc block closed by "=cut".
    pod_blocks: bool = False

    def __post_init__(self):
        if not (self.line_markers or self.block_delimiters or self.column1_markers or self.pod_blocks):
            raise ValueError(f"language {self.name} declares no comment markers")


_C_STRINGS = (StringRule('"', '"'), StringRule("'", "'"))

C = SourceLanguage("c", line_markers=("//",), block_delimiters=(("/*", "*/"),),
                   string_rules=_C_STRINGS)
CPP = SourceLanguage("cpp", line_markers=("//",), block_delimiters=(("/*", "*/"),),
                     string_rules=_C_STRINGS)
JAVA = SourceLanguage("java", line_markers=("//",), block_delimiters=(("/*", "*/"),),
                      string_rules=_C_STRINGS)
GO = SourceLanguage("go", line_markers=("//",), block_delimiters=(("/*", "*/"),),
                    string_rules=(StringRule('"', '"'), StringRule("'", "'"),
                                  StringRule("`", "`", escape="none", multiline=True)))
TYPESCRIPT = SourceLanguage("typescript", line_markers=("//",), block_delimiters=(("/*", "*/"),),
                            string_rules=(StringRule('"', '"'), StringRule("'", "'"),
                                          StringRule("`", "`", multiline=True)))
PHP = SourceLanguage("php", line_markers=("//", "#"), block_delimiters=(("/*", "*/"),),
                     string_rules=_C_STRINGS)
PYTHON = SourceLanguage("python", line_markers=("#",),
                        string_rules=(StringRule('"""', '"""', multiline=True),
                                      StringRule("'''", "'''", multiline=True),
                                      StringRule('"', '"'), StringRule("'", "'")))
PERL = SourceLanguage("perl", line_markers=("#",), string_rules=_C_STRINGS, pod_blocks=True)
FORTRAN_FIXED = SourceLanguage("fortran", column1_markers=("C", "c", "*"),
                               string_rules=(StringRule("'", "'", escape="double"),
                                             StringRule('"', '"', escape="double")))
FORTRAN_FREE = SourceLanguage("fortran", line_markers=("!",),
                              string_rules=(StringRule("'", "'", escape="double"),
                                            StringRule('"', '"', escape="double")))

# Extension table. Lookup is case-insensitive; each extension maps to exactly
# one language dialect.
EXTENSION_TABLE: dict[str, SourceLanguage] = {
    ".c": C,
    ".h": C,
    ".cpp": CPP,
    ".cc": CPP,
    ".cxx": CPP,
    ".hpp": CPP,
    ".hh": CPP,
    ".hxx": CPP,
    ".py": PYTHON,
    ".pyw": PYTHON,
    ".pl": PERL,
    ".pm": PERL,
    ".f": FORTRAN_FIXED,
    ".for": FORTRAN_FIXED,
    ".f77": FORTRAN_FIXED,
    ".f90": FORTRAN_FREE,
    ".f95": FORTRAN_FREE,
    ".f03": FORTRAN_FREE,
    ".f08": FORTRAN_FREE,
    ".ts": TYPESCRIPT,
    ".tsx": TYPESCRIPT,
    ".go": GO,
    ".php": PHP,
    ".java": JAVA,
}

LANGUAGE_NAMES: tuple[str, ...] = tuple(sorted({lang.name for lang in EXTENSION_TABLE.values()}))


def detect_language(file_path) -> SourceLanguage | None:
    """Map a path to its language by extension, or None if unsupported."""
    _, ext = os.path.splitext(str(file_path))
    return EXTENSION_TABLE.get(ext.lower())
