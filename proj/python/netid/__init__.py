"""Maximum-likelihood identification of dynamic networks with missing data.

Thin Python layer over the C++ core. Configs use the same JSON document as
the ``netid`` command-line tool.
"""

import json
from pathlib import Path

from ._netid import (
    Config,
    Likelihood,
    estimate,
    evaluate,
    fit,
    freq_response,
    indirect,
    simulate,
    zoh,
)

__all__ = [
    "Config",
    "Likelihood",
    "estimate",
    "evaluate",
    "fit",
    "freq_response",
    "indirect",
    "load_config",
    "simulate",
    "zoh",
]


def load_config(source):
    """Config from a path, a JSON string or a dict."""
    if isinstance(source, dict):
        return Config.from_json(json.dumps(source))
    if isinstance(source, str) and source.lstrip().startswith("{"):
        return Config.from_json(source)
    return Config.from_json(Path(source).read_text())
