"""Canonical label set for the classification protocol.

The wire order below is the protocol's canonical order. Servers must
advertise exactly this list from /info, and ties between equal scores
resolve to the lowest index.
"""

LABELS = (
    "non-satd",
    "code-design",
    "documentation",
    "test",
    "requirement",
    "scientific",
)

N_LABELS = len(LABELS)

# wire name -> canonical index
LABEL_INDEX = {name: i for i, name in enumerate(LABELS)}

MAX_LENGTH = 128

SCORE_SUM_TOLERANCE = 1e-6
