"""Fair multitask representation learning.

Thin wrapper over the compiled extension. Reports cross the C++ boundary as
JSON text; `run_protocol` decodes them to dicts.
"""

import json as _json

try:
    from ._fairrep import *  # noqa: F401,F403  (installed package layout)
    from . import _fairrep as _core
except ImportError:  # in-tree: extension sits next to the package on sys.path
    from _fairrep import *  # noqa: F401,F403
    import _fairrep as _core

__version__ = "0.1.0"


def run_protocol(collection, **kwargs):
    """Run the full experiment protocol and return the report as a dict.

    Accepts the keyword arguments of ``run_protocol_json``; empty grids fall
    back to the defaults for the collection's dimension.
    """
    return _json.loads(_core.run_protocol_json(collection, **kwargs))
