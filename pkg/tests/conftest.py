"""Session-wide test setup."""

import numpy  # noqa: F401  (must be loaded before the thread limit applies)
import scipy.linalg  # noqa: F401
import threadpoolctl

# The matrices in this package are at most 64x64; BLAS worker threads only
# add wake-up latency (dramatically so under sandboxed kernels), and
# single-threaded BLAS keeps trial results bit-reproducible.
_limiter = threadpoolctl.threadpool_limits(limits=1)
