import numpy as np
import pytest

from cavqfi.scaling import exponent_map, fit_power_law

NS = np.arange(2, 11)


def test_exact_quadratic():
    f = fit_power_law(NS, 2 * NS ** 2 + 1)
    assert f.converged
    assert (f.a, f.b, f.c) == pytest.approx((2, 2, 1), abs=1e-6)
    assert np.isfinite(f.residual_norm)


def test_linear():
    assert fit_power_law(NS, 3.0 * NS).b == pytest.approx(1, abs=1e-6)


@pytest.mark.parametrize("b", [0.5, 0.9, 1.3, 1.7, 2.1, 2.5])
def test_recovers_exponent_range(b):
    y = 1.7 * NS ** b + 0.4
    f = fit_power_law(NS, y)
    assert (f.a, f.b, f.c) == pytest.approx((1.7, b, 0.4), abs=1e-6)


def test_scale_equivariance():
    y = 2 * NS ** 1.6 + 3
    f1 = fit_power_law(NS, y)
    f2 = fit_power_law(NS, 7.5 * y)
    assert f2.b == pytest.approx(f1.b, abs=1e-8)
    assert f2.a == pytest.approx(7.5 * f1.a, rel=1e-8)
    assert f2.c == pytest.approx(7.5 * f1.c, rel=1e-8, abs=1e-8)


def test_noise_band():
    bs = []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        y = (2 * NS ** 2 + 1) * (1 + 0.01 * rng.standard_normal(len(NS)))
        bs.append(fit_power_law(NS, y).b)
    assert 1.9 <= min(bs) and max(bs) <= 2.1


def test_stderr_and_predict():
    f = fit_power_law(NS, 2 * NS ** 2 + 1)
    assert f.stderr is not None and len(f.stderr) == 3
    assert np.allclose(f.predict([3, 4]), [19, 33])


@pytest.mark.parametrize("ns,ys", [
    ([2, 3, 4], [1, 2, 3]),
    ([2, 2, 3, 3, 4], [1, 1, 2, 2, 3]),
    ([2, 3, 4, 5], [1, 2, -3, 4]),
    ([2, 3, 4, 5], [1, 2, 3]),
])
def test_rejects_bad_input(ns, ys):
    with pytest.raises(ValueError):
        fit_power_law(ns, ys)


def test_diverged_fit_reports_no_b():
    f = fit_power_law(NS, np.full(len(NS), 5.0), b_starts=[np.nan])
    assert not f.converged and f.b is None
    with pytest.raises(ValueError):
        f.predict([1])


def test_map_with_injected_pipeline():
    fn = lambda n, k, g: (1 + k + g) * n ** (2.0 - 0.1 * k) + 1
    m = exponent_map("x", [0.2, 3.0], [0.2, 3.0], range(2, 9), max_qfi_fn=fn)
    assert m.converged.all()
    assert m.b[0, 1] == pytest.approx(1.7, abs=1e-6)
    rows = list(m.rows())
    assert len(rows) == 4 and all(r["status"] == "converged" for r in rows)


def test_map_records_failures():
    def fn(n, k, g):
        if k > 1:
            raise RuntimeError("boom")
        return n ** 2.0
    m = exponent_map("ghz", [0.2, 3.0], [0.5], range(2, 7), max_qfi_fn=fn)
    assert m.converged.tolist() == [[True, False]]
    assert (3.0, 0.5) in m.errors


def test_map_preconditions():
    with pytest.raises(ValueError):
        exponent_map("x", [], [1.0], range(2, 6))
    with pytest.raises(ValueError):
        exponent_map("x", [5.0], [1.0], range(2, 6))


def test_map_pipeline_corners():
    m = exponent_map("x", [0.2, 3.0], [0.2, 3.0], range(2, 9))
    assert m.converged.all() and not m.errors
    assert np.all(np.isfinite(m.b))
