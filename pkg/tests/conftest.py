import os
import sys

# single-threaded BLAS before numpy loads, so suite results are reproducible
for _v in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ[_v] = "1"

sys.path.insert(0, os.path.dirname(__file__))
