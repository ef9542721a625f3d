"""Kernel profiles, their moments, and the directed edge weight.

A kernel profile is a nonincreasing, nonnegative function on [0, inf) with
support inside [0, 2] and a positive value at zero.  At construction the
profile is rescaled so that the mass ``int_{B(0,2)} Phi(|z|) dz`` equals one;
the second moment ``sigma_phi = int Phi(|z|) z_1^2 dz`` is cached.

The directed weight from x to y with bandwidth h, drift strength eps is

    Phi(|B(x) (disp(x, y) - eps b(x))| / h)

with ``disp`` the minimal-image displacement on the torus.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

from graphpde.errors import ConfigurationError
from graphpde.geometry import torus_displacement

_QUAD_TOL = 1e-10


def _sphere_area(d):
    """Surface area of the unit sphere in R^d."""
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


class KernelSpec:
    """A normalized radial kernel profile in dimension ``dim``."""

    def __init__(self, profile, dim, name="custom", breakpoints=(), support_radius=2.0):
        self.dim = int(dim)
        self.name = name
        self.support_radius = float(support_radius)
        self._raw = profile
        self._validate_profile()
        omega = _sphere_area(self.dim)
        pts = [b for b in breakpoints if 0.0 < b < 2.0] or None
        raw_mass, _ = integrate.quad(
            lambda r: profile(r) * r ** (self.dim - 1), 0.0, 2.0,
            points=pts, epsabs=_QUAD_TOL, epsrel=_QUAD_TOL, limit=200)
        raw_mass *= omega
        if raw_mass <= 0.0:
            raise ValueError("kernel profile has zero mass")
        self._scale = 1.0 / raw_mass
        self.mass = 1.0
        second, _ = integrate.quad(
            lambda r: profile(r) * r ** (self.dim + 1), 0.0, 2.0,
            points=pts, epsabs=1e-8 * raw_mass, epsrel=_QUAD_TOL, limit=200)
        # int Phi(|z|) z_1^2 dz = (omega/d) * int Phi(r) r^{d+1} dr
        self.sigma_phi = self._scale * omega / self.dim * second

    def _validate_profile(self):
        if self._raw(0.0) <= 0.0:
            raise ValueError("kernel profile must be positive at zero")
        grid = np.linspace(0.0, 2.5, 101)
        vals = np.asarray(self._raw(grid), dtype=float)
        if np.any(vals < 0.0):
            raise ValueError("kernel profile must be nonnegative")
        if np.any(vals[grid > 2.0] != 0.0):
            raise ValueError("kernel profile must vanish beyond t = 2")
        if np.any(np.diff(vals) > 1e-12):
            raise ValueError("kernel profile must be nonincreasing")

    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """Normalized profile value; zero beyond the support."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < 0.0):
            raise ValueError("kernel argument must be nonnegative")
        vals = self._scale * np.asarray(self._raw(t_arr), dtype=float)
        return np.where(t_arr > 2.0, 0.0, vals) if vals.ndim else float(vals)

    def eval_unchecked(self, t):
        """Hot-path profile evaluation: caller guarantees t >= 0, and the
        profile itself vanishes beyond its support (validated at init)."""
        return self._scale * self._raw(t)

    @classmethod
    def indicator(cls, dim):
        """Top-hat profile on [0, 1]; in d=2 it normalizes to 1/pi."""
        def profile(t):
            t = np.asarray(t, dtype=float)
            return np.where(t <= 1.0, 1.0, 0.0)
        return cls(profile, dim, name="indicator", breakpoints=(1.0,),
                   support_radius=1.0)

    @classmethod
    def bump(cls, dim):
        """Smooth compactly supported profile exp(-1/(1-(t/2)^2)) on [0, 2)."""
        def profile(t):
            t = np.asarray(t, dtype=float)
            s = np.clip(t / 2.0, 0.0, None)
            with np.errstate(divide="ignore", over="ignore"):
                val = np.where(s < 1.0, np.exp(-1.0 / np.maximum(1.0 - s**2, 1e-300)), 0.0)
            return val
        return cls(profile, dim, name="bump", support_radius=2.0)


def kernel_eval(spec, t):
    return spec.eval(t)


def sigma_phi(spec):
    return spec.sigma_phi


class DriftSpec:
    """Drift field b and local metric B with sup bounds used for radii checks.

    ``b`` maps (m, d) points to (m, d) vectors.  ``B`` maps points to (m, d, d)
    matrices and defaults to the identity (``B=None``); when supplied it must
    have full rank wherever it is evaluated.  The optional analytic callables
    (``jacobian``, ``div``, ``grad_div``) feed the characteristic ODEs and the
    consistency right-hand sides.
    """

    def __init__(self, b, dim, b_sup, name="custom", B=None, Binv_sup=1.0,
                 jacobian=None, div=None, grad_div=None):
        self.b = b
        self.dim = int(dim)
        self.b_sup = float(b_sup)
        self.name = name
        self.B = B
        self.Binv_sup = float(Binv_sup)
        self.jacobian = jacobian
        self.div = div
        self.grad_div = grad_div
        if B is not None:
            self._check_full_rank()

    def _check_full_rank(self):
        axes = [np.linspace(0.0, 1.0, 5, endpoint=False)] * self.dim
        probe = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
        self.eval_B(probe)

    def eval_b(self, x):
        return np.asarray(self.b(np.atleast_2d(x)), dtype=float)

    def eval_B(self, x):
        x = np.atleast_2d(x)
        mats = np.asarray(self.B(x), dtype=float)
        dets = np.linalg.det(mats)
        if np.any(np.abs(dets) <= 1e-12):
            bad = int(np.argmin(np.abs(dets)))
            raise ConfigurationError(
                f"B(x) is rank deficient (|det|<=1e-12) at x={x[bad]}")
        return mats

    def is_identity_B(self):
        return self.B is None

    @classmethod
    def zero(cls, dim):
        z = lambda x: np.zeros_like(np.atleast_2d(x), dtype=float)
        zmat = lambda x: np.zeros((np.atleast_2d(x).shape[0], dim, dim), dtype=float)
        return cls(z, dim, 0.0, name="zero",
                   jacobian=zmat, div=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
                   grad_div=z)

    @classmethod
    def constant(cls, vec):
        vec = np.asarray(vec, dtype=float)
        dim = vec.size

        def b(x):
            x = np.atleast_2d(x)
            return np.broadcast_to(vec, (x.shape[0], dim)).copy()

        zvec = lambda x: np.zeros_like(np.atleast_2d(x), dtype=float)
        zmat = lambda x: np.zeros((np.atleast_2d(x).shape[0], dim, dim), dtype=float)
        return cls(b, dim, float(np.linalg.norm(vec)),
                   name=f"constant({','.join(f'{c:g}' for c in vec)})",
                   jacobian=zmat, div=lambda x: np.zeros(np.atleast_2d(x).shape[0]),
                   grad_div=zvec)

    @classmethod
    def rotational(cls, scale=1.0, center=(0.5, 0.5), r_plateau=0.2, r_cutoff=0.45):
        """Planar rotation about ``center``, smoothly cut off to vanish near
        the seam so the field is C^2 on the torus.  Divergence-free."""
        c = np.asarray(center, dtype=float)
        dim = 2
        A = np.array([[0.0, -1.0], [1.0, 0.0]])

        def cutoff(r):
            t = np.clip((r - r_plateau) / (r_cutoff - r_plateau), 0.0, 1.0)
            return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)

        def cutoff_prime(r):
            t = np.clip((r - r_plateau) / (r_cutoff - r_plateau), 0.0, 1.0)
            return -(30.0 * t**2 - 60.0 * t**3 + 30.0 * t**4) / (r_cutoff - r_plateau)

        def b(x):
            x = np.atleast_2d(x)
            rel = x - c
            r = np.linalg.norm(rel, axis=1)
            return scale * cutoff(r)[:, None] * rel @ A.T

        def jacobian(x):
            x = np.atleast_2d(x)
            rel = x - c
            r = np.linalg.norm(rel, axis=1)
            safe_r = np.where(r > 0.0, r, 1.0)
            chi = cutoff(r)
            dchi = np.where(r > 0.0, cutoff_prime(r) / safe_r, 0.0)
            rot = rel @ A.T  # A(x-c)
            jac = np.einsum("mi,mj->mij", rot, rel) * dchi[:, None, None]
            jac += chi[:, None, None] * A
            return scale * jac

        # tr(A (x-c)(x-c)^T d chi) = dchi * (x-c)^T A (x-c) = 0: divergence-free
        zdiv = lambda x: np.zeros(np.atleast_2d(x).shape[0])
        zvec = lambda x: np.zeros_like(np.atleast_2d(x), dtype=float)
        b_sup = abs(scale) * r_cutoff  # |b| = scale * chi(r) * r, chi = 0 past r_cutoff
        return cls(b, dim, b_sup, name=f"rotational({scale:g})",
                   jacobian=jacobian, div=zdiv, grad_div=zvec)

    @classmethod
    def gradient(cls, field, b_sup=None):
        """Gradient drift b = grad(phi) of an analytic scalar field."""
        dim = field.dim
        if b_sup is None:
            waves = 2.0 * np.pi * np.linalg.norm(field.waves, axis=1)
            b_sup = float(np.sum(np.abs(field.amplitudes) * waves))
        return cls(field.grad, dim, b_sup, name="gradient",
                   jacobian=field.hess, div=field.laplacian,
                   grad_div=field.grad_laplacian)


def check_interaction_radius(drift, h, eps):
    """Enforce 2h*Binv_sup + eps*b_sup < 1/2 (minimal-image validity)."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    if eps < 0.0:
        raise ValueError("eps must be nonnegative")
    bound = 2.0 * h * drift.Binv_sup + eps * drift.b_sup
    if bound >= 0.5:
        raise ConfigurationError(
            f"interaction radius 2h*Binv_sup + eps*b_sup = {bound:.6g} >= 1/2; "
            f"shrink h={h:g} or eps={eps:g}")
    return bound


def directed_weight(kernel, drift, x, y, h, eps):
    """Weight omega_xy = Phi(|B(x)(y - x - eps b(x))|/h), elementwise in x, y."""
    check_interaction_radius(drift, h, eps)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    disp = torus_displacement(x, y)
    shifted = disp - eps * drift.eval_b(x)
    if drift.is_identity_B():
        arg = np.linalg.norm(shifted, axis=-1) / h
    else:
        mats = drift.eval_B(x)
        arg = np.linalg.norm(np.einsum("mij,mj->mi", mats, shifted), axis=-1) / h
    w = kernel.eval(arg)
    return w if w.size > 1 else float(w.reshape(-1)[0])
