"""btmlab: exact kernels, Monte Carlo and homogenization probes for the 1-d Bouchaud trap model."""

import os as _os

import numba as _numba

if "NUMBA_THREADING_LAYER" not in _os.environ:
    # the work-queue layer ships with numba; avoids probing optional TBB/OpenMP builds
    _numba.config.THREADING_LAYER = "workqueue"

__version__ = "0.1.0"
