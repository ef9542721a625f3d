"""Analytic scalar fields on the torus with exact derivatives.

Trigonometric polynomials are closed under differentiation and periodic by
construction, which makes them the workhorse for consistency tests, built-in
densities, and gradient drifts.  Every term is

    amplitude * cos(2*pi*(k . x) + phase)

with an integer wave vector ``k`` so the field is 1-periodic in each axis.
"""

from __future__ import annotations

import numpy as np

TWO_PI = 2.0 * np.pi


class TrigPolynomial:
    """Finite sum of cosine waves ``offset + sum_i a_i cos(2 pi k_i.x + p_i)``.

    Provides value, gradient, Hessian, Laplacian, and gradient-of-Laplacian,
    all exact, all vectorized over point arrays of shape (m, d).
    """

    def __init__(self, dim, terms, offset=0.0):
        self.dim = int(dim)
        self.offset = float(offset)
        self.amplitudes = np.array([t[0] for t in terms], dtype=float)
        self.waves = np.array([t[1] for t in terms], dtype=float).reshape(-1, self.dim)
        self.phases = np.array([t[2] if len(t) > 2 else 0.0 for t in terms], dtype=float)

    def _angles(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return TWO_PI * x @ self.waves.T + self.phases  # (m, nterms)

    def value(self, x):
        ang = self._angles(x)
        return self.offset + np.cos(ang) @ self.amplitudes

    def grad(self, x):
        ang = self._angles(x)
        # d/dx_j = -a * 2 pi k_j * sin(ang)
        coef = -self.amplitudes * TWO_PI
        return (np.sin(ang) * coef) @ self.waves

    def hess(self, x):
        ang = self._angles(x)
        coef = -self.amplitudes * TWO_PI**2
        c = np.cos(ang) * coef  # (m, nterms)
        return np.einsum("mt,ti,tj->mij", c, self.waves, self.waves)

    def laplacian(self, x):
        ang = self._angles(x)
        k2 = np.sum(self.waves**2, axis=1)
        coef = -self.amplitudes * TWO_PI**2 * k2
        return np.cos(ang) @ coef

    def grad_laplacian(self, x):
        ang = self._angles(x)
        k2 = np.sum(self.waves**2, axis=1)
        coef = self.amplitudes * TWO_PI**3 * k2
        return (np.sin(ang) * coef) @ self.waves

    def __call__(self, x):
        return self.value(x)


def random_trig(rng, dim, n_terms=3, max_freq=2, amplitude=1.0, offset=0.0):
    """Draw a random trigonometric polynomial with integer wave vectors."""
    terms = []
    for _ in range(n_terms):
        k = np.zeros(dim, dtype=int)
        while not k.any():
            k = rng.integers(-max_freq, max_freq + 1, size=dim)
        a = amplitude * rng.uniform(-1.0, 1.0)
        phase = rng.uniform(0.0, TWO_PI)
        terms.append((a, k, phase))
    return TrigPolynomial(dim, terms, offset=offset)
