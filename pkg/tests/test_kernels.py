import numpy as np
import pytest

from graphpde.errors import ConfigurationError
from graphpde.fields import TrigPolynomial
from graphpde.kernels import DriftSpec, KernelSpec, directed_weight, kernel_eval


def radial_mass(spec, n=400_000):
    """Quadrature oracle for int_{B(0,2)} Phi(|z|) dz via the radial formula."""
    from math import gamma, pi
    omega = 2.0 * pi ** (spec.dim / 2.0) / gamma(spec.dim / 2.0)
    r = (np.arange(n) + 0.5) * (2.0 / n)
    return omega * np.sum(spec.eval(r) * r ** (spec.dim - 1)) * (2.0 / n)


def test_indicator_values_2d():
    spec = KernelSpec.indicator(2)
    assert kernel_eval(spec, 0.5) == pytest.approx(1.0 / np.pi, rel=1e-12)
    assert kernel_eval(spec, 1.5) == 0.0
    assert kernel_eval(spec, 0.0) == pytest.approx(1.0 / np.pi, rel=1e-12)


@pytest.mark.parametrize("make", [KernelSpec.indicator, KernelSpec.bump])
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_mass_normalized(make, dim):
    spec = make(dim)
    assert radial_mass(spec) == pytest.approx(1.0, abs=1e-6)


def test_negative_argument_rejected():
    spec = KernelSpec.indicator(2)
    with pytest.raises(ValueError):
        kernel_eval(spec, -0.1)


def test_sigma_phi_indicator_2d():
    assert KernelSpec.indicator(2).sigma_phi == pytest.approx(0.25, rel=1e-10)


def test_sigma_phi_coordinate_symmetry():
    # int Phi(|z|) z1^2 dz = int Phi(|z|) z2^2 dz by radial symmetry; check the
    # cached value against a 2-d tensor-grid quadrature of both coordinates.
    spec = KernelSpec.bump(2)
    m = 2001
    ax = np.linspace(-2.0, 2.0, m)
    dx = ax[1] - ax[0]
    X, Y = np.meshgrid(ax, ax, indexing="ij")
    vals = spec.eval(np.sqrt(X**2 + Y**2))
    s1 = np.sum(vals * X**2) * dx * dx
    s2 = np.sum(vals * Y**2) * dx * dx
    assert s1 == pytest.approx(s2, rel=1e-12)
    assert spec.sigma_phi == pytest.approx(s1, abs=1e-5)


def test_profile_validation():
    with pytest.raises(ValueError):
        KernelSpec(lambda t: np.where(np.asarray(t) <= 3.0, 1.0, 0.0), 2)
    with pytest.raises(ValueError):
        KernelSpec(lambda t: np.asarray(t) * 0.0, 2)


def test_directed_weight_symmetric_when_undriven():
    kernel = KernelSpec.indicator(2)
    drift = DriftSpec.constant([1.0, 0.0])
    rng = np.random.default_rng(5)
    x = rng.random((200, 2))
    y = rng.random((200, 2))
    w_xy = directed_weight(kernel, drift, x, y, h=0.1, eps=0.0)
    w_yx = directed_weight(kernel, drift, y, x, h=0.1, eps=0.0)
    np.testing.assert_array_equal(w_xy, w_yx)


def test_directed_weight_hand_example():
    # |(0.10 - 0.02, 0.05)| / 0.1 = 0.9434 < 1 inside the indicator support
    kernel = KernelSpec.indicator(2)
    drift = DriftSpec.constant([1.0, 0.0])
    w = directed_weight(kernel, drift, [0.5, 0.5], [0.60, 0.55], h=0.1, eps=0.02)
    assert np.hypot(0.08, 0.05) / 0.1 == pytest.approx(0.9434, abs=1e-4)
    assert w == pytest.approx(1.0 / np.pi, rel=1e-12)


def test_directed_weight_outside_support():
    kernel = KernelSpec.indicator(2)
    drift = DriftSpec.zero(2)
    assert directed_weight(kernel, drift, [0.1, 0.1], [0.4, 0.1], h=0.1, eps=0.0) == 0.0


def test_directed_weight_translation_invariant():
    kernel = KernelSpec.bump(2)
    drift = DriftSpec.constant([0.3, -0.2])
    x = np.array([[0.12, 0.95]])
    y = np.array([[0.18, 0.02]])
    w0 = directed_weight(kernel, drift, x, y, h=0.08, eps=0.01)
    w1 = directed_weight(kernel, drift, x + 1.0, y - 2.0, h=0.08, eps=0.01)
    assert w0 == pytest.approx(w1, rel=1e-14)


def test_directed_weight_self_loop():
    kernel = KernelSpec.indicator(2)
    drift = DriftSpec.constant([1.0, 0.0])
    h, eps = 0.1, 0.02
    w = directed_weight(kernel, drift, [0.3, 0.3], [0.3, 0.3], h=h, eps=eps)
    assert w == pytest.approx(kernel.eval(eps * 1.0 / h), rel=1e-12)
    assert w > 0.0


def test_interaction_radius_precondition():
    kernel = KernelSpec.indicator(2)
    drift = DriftSpec.constant([1.0, 0.0])
    with pytest.raises(ConfigurationError):
        directed_weight(kernel, drift, [0.0, 0.0], [0.1, 0.1], h=0.3, eps=0.0)


def test_general_B_weight():
    kernel = KernelSpec.indicator(2)
    stretch = np.array([[2.0, 0.0], [0.0, 1.0]])

    def B(x):
        x = np.atleast_2d(x)
        return np.broadcast_to(stretch, (x.shape[0], 2, 2)).copy()

    drift = DriftSpec(lambda x: np.zeros_like(np.atleast_2d(x)), 2, 0.0,
                      name="aniso", B=B, Binv_sup=1.0)
    # |B dz| = |(2*0.04, 0.0)| = 0.08 < h=0.1 -> inside support
    w = directed_weight(kernel, drift, [0.5, 0.5], [0.54, 0.5], h=0.1, eps=0.0)
    assert w == pytest.approx(1.0 / np.pi, rel=1e-12)
    # stretching the same displacement along x2 stays unscaled: t = 0.04/0.1
    w2 = directed_weight(kernel, drift, [0.5, 0.5], [0.5, 0.54], h=0.1, eps=0.0)
    assert w2 == pytest.approx(1.0 / np.pi, rel=1e-12)
    # a singular B is rejected
    def B_bad(x):
        x = np.atleast_2d(x)
        return np.zeros((x.shape[0], 2, 2))

    with pytest.raises(ConfigurationError):
        DriftSpec(lambda x: np.zeros_like(np.atleast_2d(x)), 2, 0.0,
                  name="bad", B=B_bad)
