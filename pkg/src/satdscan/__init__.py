"""Mine source-code comments from multi-language repositories and classify
self-admitted technical debt (SATD), including scientific debt.

The pipeline: lex comments with file/line provenance (`extractor`), normalize
text (`preprocess`), classify with a local n-gram model, keyword patterns, or a
remote model server (`classifier`, `remote`), evaluate with intra-project and
cross-project protocols (`evaluation`), and aggregate whole-repository reports
(`analyzer`). The `satdscan` CLI exposes all of it.
"""

from satdscan.labels import Label

__version__ = "0.1.0"

__all__ = ["Label", "__version__"]
