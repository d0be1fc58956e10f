import numpy as np
import pytest

from driverbound.optim import BudgetError, cma_es, nelder_mead

BOX6 = [(-5.0, 5.0)] * 6


def sphere(x):
    return float(np.sum(x ** 2))


def rosenbrock(x):
    return float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)


def test_nelder_mead_sphere():
    x, f = nelder_mead(sphere, np.ones(6), BOX6, 500)
    assert f < 1e-6


def test_nelder_mead_budget_smaller_than_simplex():
    with pytest.raises(BudgetError):
        nelder_mead(sphere, np.ones(6), BOX6, 3)


def test_nelder_mead_constant_objective():
    x, f = nelder_mead(lambda x: 4.2, np.ones(6), BOX6, 50)
    assert f == 4.2
    assert np.array_equal(x, np.ones(6))


def test_nelder_mead_never_exceeds_budget():
    calls = []
    nelder_mead(lambda x: calls.append(1) or sphere(x), np.ones(3), BOX6[:3], 37)
    assert len(calls) <= 37


def test_nelder_mead_stays_in_box():
    x, f, hist = nelder_mead(lambda x: -x.sum(), np.zeros(2), [(0, 1), (0, 2)], 200,
                             return_history=True)
    pts = np.array([h[0] for h in hist])
    assert pts.min() >= 0 and np.all(pts[:, 0] <= 1) and np.all(pts[:, 1] <= 2)
    assert np.allclose(x, [1, 2])


def test_cma_sphere():
    x, f, ev = cma_es(sphere, np.ones(6), 1.0, BOX6, 2000)
    assert f < 1e-8
    assert len(ev) <= 2000


def test_cma_rosenbrock():
    x, f, _ = cma_es(rosenbrock, np.array([-1.0, 1.0]), 0.5, [(-5, 5)] * 2, 5000)
    assert f < 1e-4


def test_cma_population_too_small():
    with pytest.raises(ValueError):
        cma_es(sphere, np.ones(6), 1.0, BOX6, 100, popsize=2)


def test_cma_returns_every_evaluation():
    calls = []
    _, _, ev = cma_es(lambda x: calls.append(1) or sphere(x), np.ones(6), 1.0, BOX6, 100)
    assert len(ev) == len(calls)
    assert all(np.all(np.abs(x) <= 5) for x, _ in ev)


def test_cma_seeded():
    a = cma_es(sphere, np.ones(4), 1.0, BOX6[:4], 200, seed=3)
    b = cma_es(sphere, np.ones(4), 1.0, BOX6[:4], 200, seed=3)
    assert np.array_equal(a[0], b[0]) and a[1] == b[1]
