"""Hot loops behind the verifier and the belief diagnostics.

The compiled Cython module is used when it was built; otherwise the numpy
implementation is selected. ``use_backend`` switches explicitly (tests and the
benchmark exercise both).
"""
import numpy as np

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

BACKENDS = ("compiled", "python") if _ckernels is not None else ("python",)
_active = _ckernels if _ckernels is not None else _pykernels


def backend():
    return "compiled" if _active is _ckernels and _ckernels is not None else "python"


def use_backend(name):
    """Select ``"compiled"`` or ``"python"``; returns the previous backend name."""
    global _active
    previous = backend()
    if name == "compiled":
        if _ckernels is None:
            raise RuntimeError("compiled kernels are not available in this build")
        _active = _ckernels
    elif name == "python":
        _active = _pykernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return previous


def _csr(indptr, indices, data):
    return (
        np.ascontiguousarray(indptr, dtype=np.int64),
        np.ascontiguousarray(indices, dtype=np.int64),
        np.ascontiguousarray(data, dtype=np.float64),
    )


def bounded_reach(indptr, indices, data, term, t):
    """Rows ``k = 0..t``: probability of hitting a ``term`` node within ``k`` steps."""
    indptr, indices, data = _csr(indptr, indices, data)
    return _active.bounded_reach(indptr, indices, data, np.ascontiguousarray(term, dtype=np.uint8), int(t))


def reach_fixpoint(indptr, indices, data, term, tol=1e-12, max_iter=1_000_000):
    """Least fixpoint of eventual reachability by value iteration from below."""
    indptr, indices, data = _csr(indptr, indices, data)
    return _active.reach_fixpoint(
        indptr, indices, data, np.ascontiguousarray(term, dtype=np.uint8), float(tol), int(max_iter)
    )


def block_mass(indptr, indices, data, block_of, n_blocks):
    """Matrix ``m[s, b]`` of transition mass from node ``s`` into block ``b``."""
    indptr, indices, data = _csr(indptr, indices, data)
    return _active.block_mass(indptr, indices, data, np.ascontiguousarray(block_of, dtype=np.int64), int(n_blocks))


def overlap_terms(observed, peak, n_actions):
    """Per-step overlap and stochasticity contributions.

    ``observed[t, k]`` is type ``k``'s probability of the action actually
    played at step ``t``; ``peak[t, k]`` its largest action probability.
    """
    return _active.overlap_terms(
        np.ascontiguousarray(observed, dtype=np.float64),
        np.ascontiguousarray(peak, dtype=np.float64),
        int(n_actions),
    )
