"""Kernel backend selection.

The dynamic-programming inner loops (soft Bellman sweeps and occupancy
propagation) dominate the runtime of every fit, so they are implemented
twice: a compiled Cython extension (``_ccore``) and a vectorized numpy
fallback (``_npcore``) with identical contracts.  The compiled core is
preferred when importable; set ``SUBGOAL_IRL_PURE=1`` to force the numpy
fallback (used by the benchmark in ``benchmarks/bench_kernels.py``).
"""

import os

if os.environ.get("SUBGOAL_IRL_PURE", "") == "1":
    from . import _npcore as _impl
else:
    try:
        from . import _ccore as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _npcore as _impl

BACKEND = _impl.BACKEND

soft_value_iteration = _impl.soft_value_iteration
propagate_visitation = _impl.propagate_visitation
