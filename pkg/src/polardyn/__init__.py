"""Content and network polarization dynamics on timestamped repost corpora."""

__version__ = "0.1.0"

PRO, NEUTRAL, ANTI = "pro", "neutral", "anti"
CLASSES = (PRO, NEUTRAL, ANTI)

SECULAR, ISLAMIST = 0, 1
