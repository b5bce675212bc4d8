"""Reference HTTP segmentation service for the mask wire protocol."""

from .rules import DEFAULT_RULE, REQUIRED_COLORS, HeuristicRule, rle_encode
from .service import DEFAULT_MAX_PIXELS, create_app, serve

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MAX_PIXELS", "DEFAULT_RULE", "REQUIRED_COLORS", "HeuristicRule",
    "create_app", "rle_encode", "serve", "__version__",
]
