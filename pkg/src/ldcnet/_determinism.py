"""Pin BLAS to one thread so results are bit-identical across thread counts.

OpenBLAS changes its GEMM accumulation order with the thread count, which
breaks byte-for-byte reproducibility of checkpoints and logs. Importing this
module (which `ldcnet/__init__` does first) forces single-threaded BLAS two
ways: environment variables for the not-yet-loaded case, and a direct
`*_set_num_threads` call into any OpenBLAS already mapped into the process.
"""

import ctypes
import os
import re

_ENV_VARS = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_SET_THREADS_SYMBOLS = (
    "scipy_openblas_set_num_threads64_",
    "scipy_openblas_set_num_threads",
    "openblas_set_num_threads64_",
    "openblas_set_num_threads",
)


def _pin_loaded_openblas():
    try:
        with open("/proc/self/maps") as fh:
            maps = fh.read()
    except OSError:
        return
    for path in sorted(set(re.findall(r"(/\S*openblas\S*\.so\S*)", maps))):
        try:
            lib = ctypes.CDLL(path)
        except OSError:
            continue
        for name in _SET_THREADS_SYMBOLS:
            fn = getattr(lib, name, None)
            if fn is not None:
                fn(1)
                break


def enforce_single_thread_blas():
    for var in _ENV_VARS:
        os.environ[var] = "1"
    _pin_loaded_openblas()


enforce_single_thread_blas()
