"""Visibility-aware neural radiance fields for two interacting hand proxies.

Everything is desk-scale and deterministic: procedural scenes, an in-repo
tape autodiff engine on numpy buffers, exact mesh geometry queries, and a
patch-based adversarial trainer, exercised end to end through the ``vanf``
command line tool.
"""

__version__ = "0.1.0"
