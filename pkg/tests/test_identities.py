import json

import numpy as np
import pytest

from hermcont.differentiation import CentralDifference, ddbar
from hermcont.fields import PointSet
from hermcont.identities import RandomMetrics, RandomPotentials, verify_identities


def test_closed_form_ddbar_matches_finite_differences():
    rng = np.random.default_rng(3)
    psi = RandomPotentials.draw(2, 3, rng)
    pts = PointSet(RandomMetrics.draw(2, 3, rng).centers() + 0.3)
    eng = CentralDifference(pts, order=6, step=1e-2)
    assert np.allclose(eng.evaluate(ddbar(psi, eng)), psi.ddbar(pts.points), atol=1e-8)


def test_random_metrics_are_positive_and_hermitian():
    m = RandomMetrics.draw(3, 5, np.random.default_rng(0))
    Z = m.centers() + 0.5j
    g = m(Z)
    assert np.allclose(g, np.conj(np.swapaxes(g, -1, -2)))
    assert np.all(np.linalg.eigvalsh(g)[:, 0] >= 0.5 - 1e-12)


def test_small_suite_passes_and_is_deterministic():
    a = verify_identities(2, seed=3, count=6)
    b = verify_identities(2, seed=3, count=6)
    assert a["passed"], {k: v for s in a["suites"].values() for k, v in s.items() if not v["passed"]}
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
    assert set(a["suites"]) == {"random_metrics", "ot_tensor", "ot_model"}


def test_curve_case_skips_model_suites():
    rep = verify_identities(1, seed=0, count=4)
    assert "notice" in rep and set(rep["suites"]) == {"random_metrics"}
    assert rep["passed"]


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        verify_identities(0)
    with pytest.raises(ValueError):
        verify_identities(2, count=0)
