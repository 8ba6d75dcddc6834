"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

Set ``MLMC_FORECAST_KERNELS=python`` (or ``cython``) to force a backend.
Both backends produce bit-identical output; the compiled one is roughly
an order of magnitude faster on the path-propagation loops (see
``benchmarks/bench_kernels.py``).
"""

import os

from . import _pykernels

_choice = os.environ.get("MLMC_FORECAST_KERNELS", "auto").lower()

if _choice == "python":
    _impl = _pykernels
elif _choice == "cython":
    from . import _cykernels as _impl
elif _choice == "auto":
    try:
        from . import _cykernels as _impl
    except ImportError:
        _impl = _pykernels
else:
    raise ValueError(
        f"MLMC_FORECAST_KERNELS must be 'auto', 'python' or 'cython', got {_choice!r}"
    )

IMPLEMENTATION = _impl.IMPLEMENTATION

ou_advance = _impl.ou_advance
ou_coupled_advance = _impl.ou_coupled_advance
ou_trajectory = _impl.ou_trajectory
ou_coupled_trajectory = _impl.ou_coupled_trajectory
forecast_values = _impl.forecast_values
