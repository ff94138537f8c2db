import numpy as np
import pytest

from clthermal import oracle as O
from clthermal import propagators as P
from clthermal.core import ChiFunction, GaussianChi, ModelParams
from clthermal.errors import Instability, InvalidParameters


def test_derivative_stencil_is_fourth_order():
    errs = []
    for n in (41, 81, 161):
        x = np.linspace(-2, 2, n)
        h = x[1] - x[0]
        f = np.sin(1.3 * x)[None, :].repeat(3, axis=0)
        d = O._d1(f, h, 1)
        errs.append(np.max(np.abs(d - 1.3 * np.cos(1.3 * x))))
    orders = O.convergence_order(errs)
    assert np.all(orders > 3.7)


def test_grid_spec_validation():
    with pytest.raises(InvalidParameters):
        O.GridSpec(-1, 1, -1, 1, scheme="Euler")
    with pytest.raises(InvalidParameters):
        O.GridSpec(1, -1, -1, 1)
    p = ModelParams.natural(gamma=1.0, omega=1.0)
    spec = O.GridSpec.symmetric(5.0, 5.0, p, n=33)
    assert spec.dt == pytest.approx(0.25 * spec.stability_limit(p))
    with pytest.raises(Instability):
        O.GridSpec(-5, 5, -5, 5, 33, 33, dt=10 * spec.stability_limit(p)).check(p)


@pytest.mark.parametrize("omega", [0.0, 1.5])
def test_small_grid_tracks_closed_form(omega):
    p = ModelParams.natural(gamma=1.0, omega=omega, temperature=1.0)
    chi0 = GaussianChi.from_moments(0.3, -0.4, 1.0, 1.0, 0.2)
    fld = O.integrate(chi0, p, 0.3, O.GridSpec.default_for(chi0, p, 0.3, n=65), snapshots=[0.1])
    exact = lambda t: (lambda k, x: P.evolve_pointwise(chi0, p, t, k, x))
    assert O.compare(fld, exact(0.3)) < 1e-3
    assert O.compare(fld, exact(0.1), t=0.1) < 1e-3
    assert abs(fld.origin_value() - 1) < 1e-6
    assert len(list(fld.rows())) == 65 * 65


def test_non_gaussian_initial_state():
    p = ModelParams.natural(gamma=1.0, omega=1.0, temperature=1.0)
    cat = ChiFunction.cat_state(1.5, 0.8)
    with pytest.raises(InvalidParameters):
        O.integrate(cat, p, 0.1)
    spec = O.GridSpec.symmetric(6.0, 8.0, p, n=97)
    fld = O.integrate(cat, p, 0.2, spec)
    err = O.compare(fld, lambda k, x: P.evolve_pointwise(cat, p, 0.2, k, x))
    assert err < 1e-4


def test_refinement_reduces_error():
    p = ModelParams.natural(gamma=1.0, omega=1.0, temperature=1.0)
    chi0 = GaussianChi.from_moments(0.2, 0.1, 1.0, 1.0)
    base = O.GridSpec.default_for(chi0, p, 0.2, n=33)
    exact = lambda k, x: P.evolve_pointwise(chi0, p, 0.2, k, x)
    errs = [O.compare(O.integrate(chi0, p, 0.2, base.with_points(n, n, p)), exact) for n in (33, 65)]
    assert errs[1] < errs[0] / 8
