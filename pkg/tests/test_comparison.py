import numpy as np
import pytest
from numpy.testing import assert_allclose

from tests.context import clfstab  # noqa: F401
from clfstab.comparison import (KFunction, KLFunction, power, identity,
                                piecewise_linear, k_eval, k_inverse,
                                k_compose, exp_envelope, check_kl_estimate,
                                fit_kl_envelope, fit_k_envelope)
from clfstab.systems import Trajectory
from clfstab.errors import (OutOfRange, InvalidParams, UnboundedBundle,
                            InvalidBundle)


def decaying(id, x0, lam=1.0, t_end=5.0):
    t = np.linspace(0, t_end, 51)
    return Trajectory(id, t, np.outer(np.exp(-lam * t), x0))


class TestKFunction:

    def test_power(self):
        f = power(2.0, 3.0)
        assert f(2.0) == pytest.approx(16.0)
        assert f.inverse(16.0) == pytest.approx(2.0)
        assert f.is_class_kinf()

    def test_negative_argument(self):
        with pytest.raises(OutOfRange):
            identity()(-1.0)

    def test_domain_bound(self):
        f = power(1.0, 1.0, domain_bound=2.0)
        assert not f.is_class_kinf()
        assert f.sup() == pytest.approx(2.0)
        with pytest.raises(OutOfRange):
            f(3.0)
        with pytest.raises(OutOfRange):
            f.inverse(2.5)

    def test_piecewise_linear_extrapolates(self):
        f = piecewise_linear([[1.0, 2.0], [2.0, 3.0]])
        assert f(0.5) == pytest.approx(1.0)
        assert f(4.0) == pytest.approx(5.0)
        assert f.inverse(5.0) == pytest.approx(4.0)

    def test_piecewise_linear_made_increasing(self):
        f = piecewise_linear([[1.0, 1.0], [2.0, 1.0]])
        assert f.is_class_k_on(np.linspace(0, 3, 31))

    def test_compose_and_inverse(self):
        f = k_compose(power(1.0, 2.0), power(3.0, 1.0))
        assert k_eval(f, 2.0) == pytest.approx(36.0)
        assert k_inverse(f)(36.0) == pytest.approx(2.0)
        assert f.is_class_kinf()

    def test_vectorized(self):
        assert_allclose(power(1.0, 2.0)(np.array([1.0, 2.0])), [1.0, 4.0])

    def test_dict_round_trip(self):
        f = k_compose(piecewise_linear([[1.0, 2.0]]), power(2.0, 0.5))
        back = KFunction.from_dict(f.as_dict())
        assert back(3.0) == pytest.approx(f(3.0))

    def test_invalid(self):
        with pytest.raises(InvalidParams):
            power(0.0, 1.0)
        with pytest.raises(InvalidParams):
            KFunction('log')


class TestKLFunction:

    def test_exp_envelope(self):
        beta = exp_envelope(identity(), 2.0)
        assert beta(3.0, 0.0) == pytest.approx(3.0)
        assert beta(3.0, 1.0) == pytest.approx(3.0 * np.exp(-2.0))
        assert beta.is_class_kl()
        assert not exp_envelope(identity(), 0.0).is_class_kl()

    def test_negative_rate(self):
        with pytest.raises(InvalidParams):
            exp_envelope(identity(), -1.0)

    def test_tabulated_matches_on_grid(self):
        beta = exp_envelope(power(2.0, 1.0), 1.0)
        s, t = np.linspace(0, 2, 5), np.linspace(0, 4, 9)
        tab = beta.tabulate(s, t)
        assert tab(1.0, 2.0) == pytest.approx(beta(1.0, 2.0))
        assert tab(4.0, 0.0) == pytest.approx(2 * tab(2.0, 0.0))
        assert tab.monotone_on(s, t)

    def test_round_trip(self):
        beta = exp_envelope(power(2.0, 1.0), 0.5)
        back = KLFunction.from_dict(beta.as_dict())
        assert back(1.5, 2.0) == pytest.approx(beta(1.5, 2.0))


class TestEnvelopes:

    def test_check_passes_and_flags(self):
        trajs = [decaying(0, [1.0]), decaying(1, [-2.0])]
        assert check_kl_estimate(trajs, exp_envelope(identity(), 1.0)).passed
        report = check_kl_estimate(trajs, exp_envelope(identity(), 2.0))
        assert not report.passed
        assert report.max_ratio > 1.0
        assert {v['trajectory'] for v in report.violations} == {0, 1}

    def test_floor(self):
        trajs = [decaying(0, [1.0], lam=0.0)]
        beta = exp_envelope(identity(), 1.0)
        assert not check_kl_estimate(trajs, beta).passed
        assert check_kl_estimate(trajs, beta, eps=1.0).passed

    def test_fit_recovers_rate(self):
        trajs = [decaying(i, [s], lam=0.7) for i, s in
                 enumerate([0.5, 1.0, 2.0])]
        beta = fit_kl_envelope(trajs)
        assert beta.lam == pytest.approx(0.7, rel=1e-6)
        assert check_kl_estimate(trajs, beta).passed

    def test_fit_escaped(self):
        traj = decaying(0, [1.0])
        traj.escaped = True
        with pytest.raises(UnboundedBundle):
            fit_kl_envelope([traj])

    def test_fit_origin_leaving_floor(self):
        t = np.linspace(0, 1, 3)
        traj = Trajectory(0, t, [[0.0], [0.5], [0.1]], x0=[0.0])
        with pytest.raises(InvalidBundle):
            fit_kl_envelope([traj])
        with pytest.raises(InvalidBundle):
            fit_kl_envelope([])

    def test_fit_k_envelope(self):
        f = fit_k_envelope([1.0, 2.0, 2.0, 3.0], [1.0, 3.0, 2.0, 2.5])
        assert f(1.0) == pytest.approx(1.0)
        assert f(2.0) == pytest.approx(3.0)
        assert f(3.0) >= 3.0
        assert f.is_class_k_on(np.linspace(0, 4, 41))
