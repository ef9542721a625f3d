"""Torus arithmetic and i.i.d. sampling from a density on [0,1)^d.

Points on the torus are plain float arrays with every coordinate in the
fundamental domain [0, 1).  A point cloud is an (n, d) array.
"""

from __future__ import annotations

import numpy as np

from graphpde.errors import ContractViolationError
from graphpde.fields import TWO_PI, TrigPolynomial

_PROBE_SEED = 0x9E3779B9  # fixed stream for construction-time spot checks


def wrap(v):
    """Reduce coordinates modulo 1 into [0, 1)."""
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError("coordinates must be finite")
    out = np.mod(v, 1.0)
    # mod of a tiny negative can round to exactly 1.0
    out[out >= 1.0] = 0.0
    return out


def torus_displacement(x, y):
    """Minimal-image representative of y - x, components in [-1/2, 1/2).

    The computation ``d - rint(d)`` is exact in floating point, so the result
    is exactly antisymmetric in (x, y) except on the half-open boundary, where
    +1/2 is folded to -1/2 (norms are unaffected).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    d = y - x
    d = d - np.rint(d)
    d[d >= 0.5] = -0.5
    return d


def torus_distance(x, y):
    """Geodesic (minimal-image Euclidean) distance on the torus."""
    return np.linalg.norm(torus_displacement(x, y), axis=-1)


class DensitySpec:
    """A probability density on the torus with known positive bounds.

    ``rho`` maps an (m, d) array to (m,) values.  ``rho_min``/``rho_max`` are
    caller-supplied bounds, spot-checked on a probe grid at construction.
    The optional ``grad_log``/``hess_log`` callables supply exact derivatives
    of log(rho) for the analytic code paths (consistency right-hand sides,
    characteristic ODEs); built-ins always provide them.
    """

    def __init__(self, rho, dim, rho_min, rho_max, name="custom",
                 grad_log=None, hess_log=None):
        if rho_min <= 0.0:
            raise ValueError("rho_min must be positive")
        if not np.isfinite(rho_max) or rho_max < rho_min:
            raise ValueError("rho_max must be finite and >= rho_min")
        self.rho = rho
        self.dim = int(dim)
        self.rho_min = float(rho_min)
        self.rho_max = float(rho_max)
        self.name = name
        self.grad_log = grad_log
        self.hess_log = hess_log
        self._spot_check()

    def _spot_check(self):
        if self.dim <= 3:
            axes = [np.linspace(0.0, 1.0, 9, endpoint=False)] * self.dim
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
            probe = grid.reshape(-1, self.dim)
        else:
            rng = np.random.default_rng(_PROBE_SEED)
            probe = rng.random((512, self.dim))
        vals = np.asarray(self.rho(probe), dtype=float)
        tol = 1e-12 * max(1.0, self.rho_max)
        if np.any(vals < self.rho_min - tol) or np.any(vals > self.rho_max + tol):
            raise ValueError(
                f"density '{self.name}' leaves [{self.rho_min}, {self.rho_max}] "
                "on the probe grid")

    @classmethod
    def uniform(cls, dim):
        zeros_vec = lambda x: np.zeros_like(np.atleast_2d(x), dtype=float)
        zeros_mat = lambda x: np.zeros(
            np.atleast_2d(x).shape + (np.atleast_2d(x).shape[-1],), dtype=float)
        return cls(lambda x: np.ones(np.atleast_2d(x).shape[0]), dim, 1.0, 1.0,
                   name="uniform", grad_log=zeros_vec, hess_log=zeros_mat)

    @classmethod
    def cosine_bump(cls, dim, amplitude=0.5, axis=0):
        """rho(x) = 1 + amplitude * cos(2 pi x_axis), amplitude in (0, 1)."""
        if not 0.0 < amplitude < 1.0:
            raise ValueError("amplitude must lie in (0, 1)")
        k = np.zeros(dim, dtype=int)
        k[axis] = 1
        field = TrigPolynomial(dim, [(amplitude, k, 0.0)], offset=1.0)
        return cls.from_scalar(field, dim, 1.0 - amplitude, 1.0 + amplitude,
                               name=f"cosine_bump({amplitude:g},axis={axis})")

    @classmethod
    def from_scalar(cls, field, dim, rho_min, rho_max, name="scalar"):
        """Build from an analytic scalar field, deriving log-derivatives."""

        def grad_log(x):
            return field.grad(x) / field.value(x)[:, None]

        def hess_log(x):
            val = field.value(x)
            g = field.grad(x) / val[:, None]
            return field.hess(x) / val[:, None, None] - np.einsum("mi,mj->mij", g, g)

        return cls(field.value, dim, rho_min, rho_max, name=name,
                   grad_log=grad_log, hess_log=hess_log)


def sample_density(spec, n, seed):
    """Draw n i.i.d. points from ``spec`` by rejection against rho_max.

    Proposals are uniform on [0,1)^d and accepted with probability
    rho(x)/rho_max.  The whole draw is a deterministic function of ``seed``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    d = spec.dim
    out = np.empty((n, d), dtype=float)
    filled = 0
    while filled < n:
        want = n - filled
        batch = max(256, int(1.3 * want * spec.rho_max / max(spec.rho_min, 1e-300)))
        batch = min(batch, max(want * 4, 4096))
        pts = rng.random((batch, d))
        vals = np.asarray(spec.rho(pts), dtype=float)
        if np.any(vals > spec.rho_max * (1.0 + 1e-12)):
            raise ContractViolationError(
                f"density '{spec.name}' returned a value above rho_max={spec.rho_max}")
        accept = rng.random(batch) * spec.rho_max < vals
        take = min(int(accept.sum()), want)
        out[filled:filled + take] = pts[accept][:take]
        filled += take
    return out
