import numpy as np
import pytest
from numpy.testing import assert_allclose

from tests.context import clfstab  # noqa: F401
from clfstab import signals
from clfstab.signals import Signal, parse_signal, scaled
from clfstab.errors import InvalidPerturbation


class TestGenerators:

    def test_zero(self):
        s = signals.zero(3)
        assert s.sup_norm == 0.0
        assert_allclose(s(1.0), np.zeros(3))

    def test_constant_bound_is_exact(self):
        s = signals.constant([3.0, 4.0])
        assert s.sup_norm == pytest.approx(5.0)
        assert_allclose(s(7.0), [3.0, 4.0])

    def test_sinusoid_stays_in_bound(self):
        s = signals.sinusoid(0.5, 2.0, dim=2)
        vals = [np.linalg.norm(s(t)) for t in np.linspace(0, 3, 301)]
        assert max(vals) <= 0.5 + 1e-12
        assert max(vals) > 0.49

    def test_piecewise_is_deterministic(self):
        a = signals.piecewise(7, 0.1, 1.0, dim=2)
        b = signals.piecewise(7, 0.1, 1.0, dim=2)
        ts = np.linspace(0, 2, 57)
        assert_allclose([a(t) for t in ts], [b(t) for t in ts])
        assert_allclose(a(0.01), a(0.09))
        assert all(np.linalg.norm(a(t)) <= 1.0 for t in ts)

    def test_piecewise_needs_dwell(self):
        with pytest.raises(InvalidPerturbation):
            signals.piecewise(0, 0.0, 1.0)

    def test_pulse(self):
        s = signals.pulse([2.0], 1.0, 0.5)
        assert_allclose(s(0.9), [0.0])
        assert_allclose(s(1.2), [2.0])
        assert_allclose(s(1.5), [0.0])

    def test_radial_and_ridge(self):
        r = signals.radial(0.3, 2)
        assert_allclose(r(0.0, [3.0, 4.0]), [0.18, 0.24])
        assert_allclose(r(0.0, [0.0, 0.0]), [0.0, 0.0])
        ridge = signals.ridge_flip(0.2, 2)
        assert_allclose(ridge(0.0, [1.0, 5.0]), [-0.2, 0.0])
        assert_allclose(ridge(0.0, [-1.0, 5.0]), [0.2, 0.0])

    def test_callback_is_clipped(self):
        s = signals.callback(lambda t, x: [10.0, 0.0], 1.0, 2)
        assert_allclose(s(0.0), [1.0, 0.0])
        with pytest.raises(InvalidPerturbation):
            Signal.from_dict(s.as_dict())

    def test_scaled(self):
        s = scaled(signals.radial(0.3, 2), 2.0)
        assert s.sup_norm == pytest.approx(0.6)
        c = scaled(signals.constant([1.0, 1.0]), 0.5)
        assert_allclose(c(0.0), [0.5, 0.5])


class TestParse:

    @pytest.mark.parametrize('text, kind, bound', [
        ('zero', 'zero', 0.0),
        ('constant:0.5', 'constant', np.sqrt(2) * 0.5),
        ('sinusoid:0.2:1', 'sinusoid', 0.2),
        ('piecewise:3:0.1:0.4', 'piecewise', 0.4),
        ('pulse:1,0:0:1', 'pulse', 1.0),
        ('radial:0.1', 'radial', 0.1),
        ('ridge:0.1', 'ridge_flip', 0.1),
    ])
    def test_kinds(self, text, kind, bound):
        s = parse_signal(text, 2)
        assert s.kind == kind
        assert s.dim == 2
        assert s.sup_norm == pytest.approx(bound)

    @pytest.mark.parametrize('text', ['noise:1', 'sinusoid:x:1',
                                      'piecewise:1'])
    def test_malformed(self, text):
        with pytest.raises(InvalidPerturbation):
            parse_signal(text, 1)

    def test_dict_round_trip(self):
        s = parse_signal('piecewise:3:0.1:0.4', 2)
        back = Signal.from_dict(s.as_dict())
        assert_allclose(back(0.35), s(0.35))
