"""Cross-modality discourse classification of image-text posts."""

import os as _os

_here = _os.path.dirname(__file__)
if "XMDISC_DATA_DIR" not in _os.environ and _os.path.isdir(_os.path.join(_here, "data")):
    _os.environ["XMDISC_DATA_DIR"] = _os.path.join(_here, "data")

from ._core import *  # noqa: E402,F401,F403
from ._core import (  # noqa: E402,F401
    BackendUnavailable,
    ConfigError,
    DataError,
    Error,
    ShapeError,
    TrainingDiverged,
)

__version__ = "0.1.0"
