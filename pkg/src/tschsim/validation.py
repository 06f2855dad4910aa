"""Input validation helpers shared by the estimators and solvers."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_weights(w, *, square=False, name="weights"):
    """Return ``w`` as a finite, non-negative 2-D float array.

    Raises ``ValueError`` on NaN/inf, negative entries, or (with
    ``square=True``) a non-square shape.
    """
    w = check_array(w, dtype=np.float64, ensure_2d=True, ensure_min_samples=1,
                    ensure_min_features=1, input_name=name)
    if square and w.shape[0] != w.shape[1]:
        raise ValueError(f"{name} must be square, got shape {w.shape}")
    if (w < 0).any():
        raise ValueError(f"{name} must be non-negative")
    return w


def check_positive(value, name, *, integer=False, allow_zero=False):
    if integer:
        ok = isinstance(value, numbers.Integral) and not isinstance(value, bool)
    else:
        ok = isinstance(value, numbers.Real) and not isinstance(value, bool) and np.isfinite(value)
    if not ok:
        kind = "an integer" if integer else "a finite number"
        raise ValueError(f"{name} must be {kind}, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value!r}")
    return value


def check_pmf(pmf, *, atol=1e-9, name="pmf"):
    """Validate an array whose last axis holds probability vectors."""
    pmf = np.asarray(pmf, dtype=np.float64)
    if pmf.ndim < 1 or pmf.shape[-1] == 0:
        raise ValueError(f"{name} must have a non-empty last axis")
    if not np.isfinite(pmf).all() or (pmf < 0).any():
        raise ValueError(f"{name} entries must be finite and non-negative")
    sums = pmf.sum(axis=-1)
    if not np.allclose(sums, 1.0, rtol=0.0, atol=atol):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise ValueError(f"{name} rows must sum to 1 (worst deviation {worst:.3g})")
    return pmf


def as_generator(random_state):
    """Accept None, an int, a SeedSequence or a Generator."""
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
