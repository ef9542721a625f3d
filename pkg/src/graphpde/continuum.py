"""Periodic-grid continuum operators and solvers.

All discretizations are conservative (flux form): divergence terms are
differences of face fluxes with two-point-average face values, so multiplying
by rho^2 and summing over the grid telescopes to zero exactly.  That makes the
discrete conservation identity  sum rho^2 u = sum rho v  hold to solver
tolerance for the stationary second-order problem.

The stationary problems are solved by assembling the (strongly diagonally
dominant for eta*gamma_eps < 1) sparse grid system and factorizing it, with
iterative refinement until the infinity-norm residual of the *matrix-free*
operator application meets the requested tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sla

from graphpde.errors import ConfigurationError, NonConvergenceError, RegimeError
from graphpde.geometry import wrap

_REFINE_ROUNDS = 4
_DIRECT_LIMIT = 400_000  # unknowns; beyond this use preconditioned BiCGStab


@dataclass
class GridField:
    """Values on the N^d periodic grid with node j at coordinates j/N."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid values must be finite")
        if len(set(self.values.shape)) != 1:
            raise ValueError("grid must have equal resolution along every axis")

    @property
    def dim(self):
        return self.values.ndim

    @property
    def resolution(self):
        return self.values.shape[0]

    @classmethod
    def from_callable(cls, f, resolution, dim):
        pts = grid_points(resolution, dim)
        vals = np.asarray(f(pts), dtype=float).reshape((resolution,) * dim)
        return cls(vals)

    @classmethod
    def constant(cls, value, resolution, dim):
        return cls(np.full((resolution,) * dim, float(value)))


def grid_points(resolution, dim):
    """All grid nodes as an (N^d, d) array, C-ordered to match .ravel()."""
    axis = np.arange(resolution) / resolution
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, dim)


@dataclass
class PdeCoeffs:
    """Coefficients of the continuum problem on one grid.

    gamma_eps = (1-alpha) eps / alpha and gamma_h = (1-alpha) h^2 / alpha are
    the effective advection and diffusion strengths; eta is the grid sup of
    rho^-2 div(rho^2 b), whose product with gamma_eps must stay below one for
    the stationary solvers.
    """

    rho: np.ndarray
    b: np.ndarray  # (d, N, ..., N); zero field for drift-free problems
    v: np.ndarray
    gamma_eps: float
    gamma_h: float
    sigma_phi: float
    eta: float = None
    alpha: float = None
    eps: float = None
    h: float = None
    density: object = dataclass_field(default=None, repr=False)
    drift: object = dataclass_field(default=None, repr=False)
    v_func: object = dataclass_field(default=None, repr=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.rho.min() <= 0.0:
            raise ValueError("rho must be positive on the grid")
        if self.gamma_eps < 0.0 or self.gamma_h < 0.0:
            raise ValueError("gamma_eps and gamma_h must be nonnegative")
        if self.b.shape != (self.dim,) + self.rho.shape:
            raise ValueError("b must have shape (d,) + grid shape")
        if self.eta is None:
            self.eta = self._eta_on_grid()

    @property
    def dim(self):
        return self.rho.ndim

    @property
    def resolution(self):
        return self.rho.shape[0]

    def _eta_on_grid(self):
        if not self.b.any():
            return 0.0
        if self.drift is not None and self.density is not None and \
                self.drift.div is not None and self.density.grad_log is not None:
            pts = grid_points(self.resolution, self.dim)
            w = (np.asarray(self.drift.div(pts))
                 + 2.0 * np.einsum("mi,mi->m", self.density.grad_log(pts),
                                   self.drift.eval_b(pts)))
            return float(np.abs(w).max())
        N = self.resolution
        rho2 = self.rho**2
        div = np.zeros_like(self.rho)
        for a in range(self.dim):
            q = rho2 * self.b[a]
            div += (np.roll(q, -1, axis=a) - np.roll(q, 1, axis=a)) * (N / 2.0)
        return float(np.abs(div / rho2).max())

    @classmethod
    def from_fields(cls, density, drift, v, resolution, dim, alpha, eps, h,
                    kernel=None, sigma_phi=None):
        """Sample analytic fields on the grid and derive the gamma factors."""
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        if sigma_phi is None:
            if kernel is None:
                raise ValueError("supply kernel or sigma_phi")
            sigma_phi = kernel.sigma_phi
        pts = grid_points(resolution, dim)
        shape = (resolution,) * dim
        rho = np.asarray(density.rho(pts), dtype=float).reshape(shape)
        b = np.moveaxis(drift.eval_b(pts).reshape(shape + (dim,)), -1, 0)
        v_vals = np.asarray(v(pts), dtype=float).reshape(shape)
        gamma = (1.0 - alpha) / alpha if alpha < 1.0 else 0.0
        return cls(rho=rho, b=b, v=v_vals,
                   gamma_eps=gamma * eps, gamma_h=gamma * h**2,
                   sigma_phi=float(sigma_phi), alpha=alpha, eps=eps, h=h,
                   density=density, drift=drift, v_func=v)


def _as_values(u, coeffs):
    vals = u.values if isinstance(u, GridField) else np.asarray(u, dtype=float)
    if vals.shape != coeffs.rho.shape:
        raise ValueError(
            f"resolution mismatch: field {vals.shape} vs grid {coeffs.rho.shape}")
    return vals


def _second_order_apply(coeffs, u):
    """u + gamma_eps rho^-2 div(rho^2 b u) - (sigma/2) gamma_h rho^-2 div(rho^2 grad u)."""
    N = coeffs.resolution
    rho2 = coeffs.rho**2
    out = u.copy()
    if coeffs.gamma_eps > 0.0 and coeffs.b.any():
        adv = np.zeros_like(u)
        for a in range(coeffs.dim):
            q = rho2 * coeffs.b[a] * u
            adv += (np.roll(q, -1, axis=a) - np.roll(q, 1, axis=a)) * (N / 2.0)
        out += coeffs.gamma_eps * adv / rho2
    if coeffs.gamma_h > 0.0:
        dif = np.zeros_like(u)
        for a in range(coeffs.dim):
            s_plus = 0.5 * (rho2 + np.roll(rho2, -1, axis=a))
            flux = s_plus * (np.roll(u, -1, axis=a) - u) * N
            dif += (flux - np.roll(flux, 1, axis=a)) * N
        out -= 0.5 * coeffs.sigma_phi * coeffs.gamma_h * dif / rho2
    return out


def continuum_operator_2nd(coeffs, u):
    """Apply the flux-form second-order operator; truncation O(N^-2)."""
    vals = _as_values(u, coeffs)
    out = _second_order_apply(coeffs, vals)
    return GridField(out) if isinstance(u, GridField) else out


def _neighbor_indices(shape):
    idx = np.arange(int(np.prod(shape))).reshape(shape)
    ups, downs = [], []
    for a in range(len(shape)):
        ups.append(np.roll(idx, -1, axis=a).ravel())
        downs.append(np.roll(idx, 1, axis=a).ravel())
    return idx.ravel(), ups, downs


def _assemble_second_order(coeffs):
    N, d = coeffs.resolution, coeffs.dim
    shape = coeffs.rho.shape
    rho2 = coeffs.rho**2
    rho2f = rho2.ravel()
    center, ups, downs = _neighbor_indices(shape)
    rows, cols, vals = [center], [center], [np.ones(center.size)]
    for a in range(d):
        up, down = ups[a], downs[a]
        if coeffs.gamma_eps > 0.0 and coeffs.b.any():
            q = (rho2 * coeffs.b[a]).ravel()
            coef = coeffs.gamma_eps * (N / 2.0) / rho2f
            rows += [center, center]
            cols += [up, down]
            vals += [coef * q[up], -coef * q[down]]
        if coeffs.gamma_h > 0.0:
            s_plus = (0.5 * (rho2 + np.roll(rho2, -1, axis=a))).ravel()
            s_minus = s_plus[down]
            coef = 0.5 * coeffs.sigma_phi * coeffs.gamma_h * N**2 / rho2f
            rows += [center, center, center]
            cols += [up, down, center]
            vals += [-coef * s_plus, -coef * s_minus, coef * (s_plus + s_minus)]
    size = center.size
    A = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size)).tocsr()
    return A


def _assemble_first_order(coeffs, delta):
    """Upwind advection flux + centered Laplacian viscosity delta."""
    N, d = coeffs.resolution, coeffs.dim
    shape = coeffs.rho.shape
    rho2 = coeffs.rho**2
    rho2f = rho2.ravel()
    center, ups, downs = _neighbor_indices(shape)
    rows, cols, vals = [center], [center], [np.ones(center.size)]
    for a in range(d):
        up, down = ups[a], downs[a]
        bf = (0.5 * (coeffs.b[a] + np.roll(coeffs.b[a], -1, axis=a))).ravel()
        bf_minus = bf[down]
        coef = coeffs.gamma_eps * N / rho2f
        # flux through face j+1/2: bf * rho2_donor * u_donor
        pos, neg = bf >= 0.0, bf < 0.0
        rows += [center, center]
        cols += [center, up]
        vals += [coef * np.where(pos, bf * rho2f, 0.0),
                 coef * np.where(neg, bf * rho2f[up], 0.0)]
        posm, negm = bf_minus >= 0.0, bf_minus < 0.0
        rows += [center, center]
        cols += [down, center]
        vals += [-coef * np.where(posm, bf_minus * rho2f[down], 0.0),
                 -coef * np.where(negm, bf_minus * rho2f, 0.0)]
        # -delta Laplacian
        rows += [center, center, center]
        cols += [up, down, center]
        vals += [np.full(center.size, -delta * N**2),
                 np.full(center.size, -delta * N**2),
                 np.full(center.size, 2.0 * delta * N**2)]
    size = center.size
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size)).tocsr()


def _solve_linear(A, rhs, apply_fn, tol, label):
    """Factorize (or precondition) and refine until the operator residual
    measured by ``apply_fn`` is below tol in the infinity norm."""
    if A.shape[0] <= _DIRECT_LIMIT:
        lu = sla.splu(A.tocsc())
        solve = lu.solve
    else:
        ilu = sla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=20)
        prec = sla.LinearOperator(A.shape, ilu.solve)

        def solve(b):
            x, info = sla.bicgstab(A, b, rtol=1e-12, atol=0.0, M=prec,
                                   maxiter=500)
            if info != 0:
                raise NonConvergenceError(
                    f"{label}: BiCGStab failed (info={info})")
            return x

    x = solve(rhs)
    residual = float(np.abs(apply_fn(x) - rhs).max())
    for _ in range(_REFINE_ROUNDS):
        if residual <= tol:
            break
        x = x + solve(rhs - A @ x)
        residual = float(np.abs(apply_fn(x) - rhs).max())
    if residual > tol:
        raise NonConvergenceError(
            f"{label}: residual {residual:g} above tol {tol:g}",
            residual=residual)
    return x, residual


def _check_regime(coeffs, need_gamma_h):
    if need_gamma_h and coeffs.gamma_h <= 0.0:
        raise RegimeError("gamma_h must be positive for the second-order solver")
    if coeffs.eta * coeffs.gamma_eps >= 1.0:
        raise RegimeError(
            f"eta*gamma_eps = {coeffs.eta * coeffs.gamma_eps:.6g} >= 1; "
            "the stationary problem leaves the well-posed regime")


def solve_pde_2nd(coeffs, tol=1e-10, return_info=False):
    """Stationary second-order problem: operator(u) = rho^-1 v."""
    _check_regime(coeffs, need_gamma_h=True)
    A = _assemble_second_order(coeffs)
    rhs = (coeffs.v / coeffs.rho).ravel()
    shape = coeffs.rho.shape
    apply_fn = lambda x: _second_order_apply(coeffs, x.reshape(shape)).ravel()
    x, residual = _solve_linear(A, rhs, apply_fn, tol, "solve_pde_2nd")
    out = GridField(x.reshape(shape))
    if return_info:
        return out, {"residual": residual, "tol": tol}
    return out


def solve_pde_1st(coeffs, delta=None, tol=1e-10, return_info=False):
    """Vanishing-viscosity first-order problem.

    Solves u + gamma_eps rho^-2 div(rho^2 b u) - delta Lap(u) = rho^-1 v with
    donor-cell upwinding (direction fixed per face by the sign of the
    face-averaged drift component).  delta defaults to 1/N, balancing the
    O(delta) regularization bias against the cell-Peclet constraint.
    """
    _check_regime(coeffs, need_gamma_h=False)
    if delta is None:
        delta = 1.0 / coeffs.resolution
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    A = _assemble_first_order(coeffs, delta)
    rhs = (coeffs.v / coeffs.rho).ravel()
    shape = coeffs.rho.shape
    apply_fn = lambda x: A @ x
    x, residual = _solve_linear(A, rhs, apply_fn, tol, "solve_pde_1st")
    out = GridField(x.reshape(shape))
    if return_info:
        return out, {"residual": residual, "tol": tol, "delta": delta}
    return out


def time_step_bound(coeffs):
    """Explicit-stability bound on dt for the forward-Euler time solver."""
    N, d = coeffs.resolution, coeffs.dim
    ratio = coeffs.rho.max() ** 2 / coeffs.rho.min() ** 2
    kappa = 0.5 * coeffs.sigma_phi * coeffs.gamma_h * ratio
    bound = 1.0 / (2.0 * d * max(kappa, 1e-300) * N**2)
    speed = coeffs.gamma_eps * float(np.abs(coeffs.b).max()) * ratio
    if speed > 0.0:
        bound = min(bound, 1.0 / (2.0 * d * speed * N))
    return min(bound, 0.5)


def solve_pde_time(coeffs, g, T, dt=None, snapshot_stride=1):
    """Forward Euler for u_t + operator(u) = rho^-1 v, u(0) = g.

    Returns (times, snapshots) where snapshots[k] is the solution at
    times[k] = k * stride * dt.
    """
    if coeffs.gamma_h <= 0.0:
        raise RegimeError("gamma_h must be positive for the time solver")
    bound = time_step_bound(coeffs)
    if dt is None:
        dt = 0.9 * bound
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if dt > bound:
        raise ConfigurationError(
            f"dt={dt:g} violates the explicit stability bound {bound:g}")
    g_vals = _as_values(g, coeffs)
    rhs = coeffs.v / coeffs.rho
    steps = int(round(T / dt))
    times = [0.0]
    snaps = [g_vals.copy()]
    u = g_vals.copy()
    for k in range(1, steps + 1):
        u = u + dt * (rhs - _second_order_apply(coeffs, u))
        if k % snapshot_stride == 0 or k == steps:
            times.append(k * dt)
            snaps.append(u.copy())
    return np.array(times), [GridField(s) for s in snaps]


def interpolate(field, points):
    """Periodic multilinear interpolation of a grid field at torus points."""
    vals = field.values if isinstance(field, GridField) else np.asarray(field)
    d = vals.ndim
    N = vals.shape[0]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    scaled = pts * N
    base = np.floor(scaled).astype(np.int64)
    frac = scaled - base
    out = np.zeros(pts.shape[0])
    for corner in itertools.product((0, 1), repeat=d):
        idx = tuple(((base[:, a] + corner[a]) % N) for a in range(d))
        w = np.ones(pts.shape[0])
        for a in range(d):
            w *= frac[:, a] if corner[a] else (1.0 - frac[:, a])
        out += w * vals[idx]
    return out


class _CharacteristicFields:
    """b, Db, and grad(div b + 2 grad(log rho).b) for the characteristic ODEs.

    Uses exact analytic derivatives when the coefficient specs carry them,
    otherwise centered O(N^-2) differences of the grid data interpolated
    multilinearly.
    """

    def __init__(self, coeffs):
        drift, density = coeffs.drift, coeffs.density
        self.analytic = (
            drift is not None and density is not None
            and drift.jacobian is not None and drift.grad_div is not None
            and density.grad_log is not None and density.hess_log is not None)
        if self.analytic:
            self.drift = drift
            self.density = density
        else:
            N, d = coeffs.resolution, coeffs.dim
            self.bgrids = coeffs.b
            rho2 = coeffs.rho**2
            div = np.zeros_like(coeffs.rho)
            for a in range(d):
                q = rho2 * coeffs.b[a]
                div += (np.roll(q, -1, axis=a) - np.roll(q, 1, axis=a)) * (N / 2.0)
            w = div / rho2
            self.gradw = [
                (np.roll(w, -1, axis=a) - np.roll(w, 1, axis=a)) * (N / 2.0)
                for a in range(d)]
            self.jac = [[(np.roll(coeffs.b[i], -1, axis=j)
                          - np.roll(coeffs.b[i], 1, axis=j)) * (N / 2.0)
                         for j in range(d)] for i in range(d)]
            self.dim = d

    def b(self, x):
        if self.analytic:
            return self.drift.eval_b(x)[0]
        return np.array([interpolate(g, x)[0] for g in self.bgrids])

    def jacobian(self, x):
        if self.analytic:
            return self.drift.jacobian(np.atleast_2d(x))[0]
        return np.array([[interpolate(self.jac[i][j], x)[0]
                          for j in range(self.dim)] for i in range(self.dim)])

    def grad_w(self, x):
        if self.analytic:
            x2 = np.atleast_2d(x)
            gd = self.drift.grad_div(x2)[0]
            gl = self.density.grad_log(x2)[0]
            hl = self.density.hess_log(x2)[0]
            jac = self.drift.jacobian(x2)[0]
            bval = self.drift.eval_b(x2)[0]
            return gd + 2.0 * (hl @ bval + jac.T @ gl)
        return np.array([interpolate(g, x)[0] for g in self.gradw])


def integrate_characteristics(coeffs, x0, z0, p0, T, dt):
    """Classical RK4 for the characteristic system of the first-order PDE:

        x' = b(x),  z' = b(x).p,  p' = z grad(div b + 2 grad(log rho).b) + Db p.

    Positions are wrapped onto the torus after every step.  Returns
    (times, xs, zs, ps).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    fields = _CharacteristicFields(coeffs)
    d = coeffs.dim
    x = wrap(np.asarray(x0, dtype=float))
    p = np.asarray(p0, dtype=float).copy()
    z = float(z0)

    def rhs(state):
        xs, zs, ps = state[:d], state[d], state[d + 1:]
        bval = fields.b(xs)
        jac = fields.jacobian(xs)
        gw = fields.grad_w(xs)
        return np.concatenate([bval, [bval @ ps], zs * gw + jac @ ps])

    steps = int(round(T / dt))
    times = np.arange(steps + 1) * dt
    xs = np.empty((steps + 1, d))
    zs = np.empty(steps + 1)
    ps = np.empty((steps + 1, d))
    state = np.concatenate([x, [z], p])
    xs[0], zs[0], ps[0] = state[:d], state[d], state[d + 1:]
    for k in range(1, steps + 1):
        k1 = rhs(state)
        k2 = rhs(state + 0.5 * dt * k1)
        k3 = rhs(state + 0.5 * dt * k2)
        k4 = rhs(state + dt * k3)
        state = state + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        state[:d] = wrap(state[:d])
        xs[k], zs[k], ps[k] = state[:d], state[d], state[d + 1:]
    return times, xs, zs, ps
