import numpy as np


def rel_err(a, b):
    """Relative L2 error of ``a`` against reference ``b``."""
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))
