"""Kernel backend selection: compiled extension if importable, else pure Python."""

from __future__ import annotations

import os

from chamon import _pykernels

BACKEND = "python"
if os.environ.get("CHAMON_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from chamon import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

plane_distances = _impl.plane_distances
mwpm_dense = _impl.mwpm_dense
match_plane = _impl.match_plane
bp_flood = _impl.bp_flood
match_all = _impl.match_all

# compiled-only post-matching pipeline; chamon.decode falls back to its own
# reference implementation when these are None
cluster_sites = getattr(_impl, "cluster_sites", None)
covering_boxes = getattr(_impl, "covering_boxes", None)
sweep_clusters = getattr(_impl, "sweep_clusters", None)
