import numpy as np
import pytest
from numpy.testing import assert_allclose

from tests.context import clfstab  # noqa: F401
from clfstab.clf_smooth import (builtin_clf, clf_from_expression,
                                universal_formula_feedback,
                                pointwise_min_feedback, clf_decrease_margin,
                                verify_clf_on_region, check_clf,
                                small_control_profile, annulus_grid,
                                known_feedback, zero_feedback,
                                constant_feedback, FeedbackLaw,
                                feedback_from_expression)
from clfstab.sampling_sim import simulate_classical
from clfstab.systems import zoo_build, box
from clfstab.consts import CONTINUOUS, DISCONTINUOUS, UNIVERSAL
from clfstab.errors import (NotAffine, CLFPremiseViolated, InvalidParams,
                            InvalidCLF, DimensionMismatch)


@pytest.fixture
def unstable():
    return zoo_build('linear-1d')


class TestCatalog:

    def test_quadratic(self):
        clf = builtin_clf('quadratic', 2)
        assert clf.V([3.0, 4.0]) == pytest.approx(12.5)
        assert_allclose(clf.grad([3.0, 4.0]), [3.0, 4.0])
        assert check_clf(clf)['valid']

    def test_double_integrator_needs_two_states(self):
        assert check_clf(builtin_clf('double-integrator', 2))['valid']
        with pytest.raises(DimensionMismatch):
            builtin_clf('double-integrator', 3)

    def test_unknown(self):
        with pytest.raises(InvalidCLF):
            builtin_clf('cosh', 1)

    def test_expression(self):
        clf = clf_from_expression('x1**2 + 2*x2**2', 2, W='x1**2')
        assert clf.V([1.0, 1.0]) == pytest.approx(3.0)
        assert_allclose(clf.grad([1.0, 1.0]), [2.0, 4.0])
        assert clf.W([2.0, 0.0]) == pytest.approx(4.0)
        assert check_clf(clf)['gradient']

    def test_expression_unknown_symbol(self):
        with pytest.raises(InvalidCLF):
            clf_from_expression('x1**2 + y', 1)


class TestFeedbackLaw:

    def test_zero_at_origin(self):
        law = FeedbackLaw(lambda x: np.ones(1), 1, CONTINUOUS, 'user')
        assert_allclose(law([0.0]), [0.0])
        assert_allclose(law([1.0]), [1.0])

    def test_unknown_class(self):
        with pytest.raises(InvalidParams):
            FeedbackLaw(lambda x: x, 1, 'smoothish', 'user')

    def test_helpers(self):
        assert_allclose(zero_feedback(2)([1.0, 1.0]), [0.0, 0.0])
        assert_allclose(constant_feedback(1.0)([0.0]), [1.0])
        law = known_feedback(zoo_build('cubic-1d'))
        assert law.continuity_class == CONTINUOUS
        assert_allclose(law([4.0]), [-2.0])
        with pytest.raises(InvalidParams):
            known_feedback(zoo_build('artstein-circles'))

    def test_rows(self):
        law = FeedbackLaw(lambda x: -2 * x, 2, CONTINUOUS, 'user')
        X = np.array([[1.0, 0.5], [0.0, 0.0], [-1.0, 2.0]])
        assert_allclose(law.rows(X), [[-2.0, -1.0], [0.0, 0.0], [2.0, -4.0]])
        batched = FeedbackLaw(lambda x: -2 * x, 2, CONTINUOUS, 'user',
                              batch=lambda X: 1 - 2 * X)
        assert_allclose(batched.rows(X), [[-1.0, 0.0], [0.0, 0.0],
                                          [3.0, -3.0]])

    def test_from_expression(self):
        law = feedback_from_expression('-x1 - x2**2', 2, 1)
        assert law.continuity_class == CONTINUOUS
        assert law.provenance == 'user'
        assert_allclose(law([1.0, 2.0]), [-5.0])
        law = feedback_from_expression('-sign(x1); x1*x2', 2, 2)
        assert law.continuity_class == DISCONTINUOUS
        assert_allclose(law([-0.5, 2.0]), [1.0, -1.0])
        assert_allclose(law([0.0, 0.0]), [0.0, 0.0])

    @pytest.mark.parametrize('text, m', [('-x3', 1), ('x1; x2', 1),
                                         ('-x1 +', 1), ('', 1)])
    def test_bad_expression(self, text, m):
        with pytest.raises(InvalidParams):
            feedback_from_expression(text, 2, m)


class TestUniversalFormula:

    def test_scalar_gain(self, unstable):
        law = universal_formula_feedback(builtin_clf('quadratic', 1),
                                         unstable)
        assert law.provenance == UNIVERSAL
        assert law.continuity_class == CONTINUOUS
        assert_allclose(law([2.0]), [-(1 + np.sqrt(2)) * 2.0], rtol=1e-12)

    def test_closed_loop_decay(self, unstable):
        law = universal_formula_feedback(builtin_clf('quadratic', 1),
                                         unstable)
        traj = simulate_classical(unstable, law, [1.0], 1.0, step=1e-3)
        assert traj.states[-1, 0] == pytest.approx(np.exp(-np.sqrt(2)),
                                                   abs=1e-5)

    def test_small_control(self, unstable):
        law = universal_formula_feedback(builtin_clf('quadratic', 1),
                                         unstable)
        rows = small_control_profile(law, 1)
        assert [d for d, _ in rows] == [0.1, 0.01, 0.001]
        assert all(u <= 2.5 * d for d, u in rows)

    def test_multi_input(self):
        sys = zoo_build('single-integrator', {'n': 2})
        law = universal_formula_feedback(builtin_clf('quadratic', 2), sys)
        # a = 0, b = x: k(x) = -x
        assert_allclose(law([1.0, 2.0]), [-1.0, -2.0])

    def test_not_affine(self):
        with pytest.raises(NotAffine):
            universal_formula_feedback(builtin_clf('quadratic', 1),
                                       zoo_build('cubic-1d'))

    def test_premise_violated(self):
        # b(x) = 0 and a(x) = |x|^2 > 0 on the x2 axis
        sys = zoo_build('linear', {'A': [[1.0, 0.0], [0.0, 1.0]],
                                   'B': [[1.0], [0.0]]})
        law = universal_formula_feedback(builtin_clf('quadratic', 2), sys)
        with pytest.raises(CLFPremiseViolated):
            law([0.0, 1.0])
        assert law([1.0, 1.0]).shape == (1,)


class TestPointwiseMin:

    def test_saturates(self, unstable):
        U = box(-3.0, 3.0, 1, resolution=61)
        law = pointwise_min_feedback(builtin_clf('quadratic', 1), unstable,
                                     U)
        assert law.continuity_class == DISCONTINUOUS
        assert_allclose(law([0.5]), [-3.0])
        assert_allclose(law([-0.5]), [3.0])
        assert_allclose(law([0.0]), [0.0])

    def test_decrease_margin(self, unstable):
        U = box(-3.0, 3.0, 1, resolution=61)
        clf = builtin_clf('quadratic', 1)
        assert clf_decrease_margin(clf, unstable, U, [1.0]) == \
            pytest.approx(-2.0)
        with pytest.raises(InvalidParams):
            clf_decrease_margin(clf, unstable, U, [0.0])


class TestVerification:

    def test_annulus_grid(self):
        pts = annulus_grid(2, 0.5, 1.0, 21)
        norms = np.linalg.norm(pts, axis=1)
        assert np.all((norms >= 0.5 - 1e-12) & (norms <= 1.0 + 1e-12))
        with pytest.raises(InvalidParams):
            annulus_grid(2, 1.0, 0.5, 21)

    def test_quadratic_clf_passes(self, unstable):
        report = verify_clf_on_region(builtin_clf('quadratic', 1), unstable,
                                      box(-3.0, 3.0, 1, resolution=61),
                                      0.1, 2.0, 41)
        assert report.passed
        assert report.checked > 0
        # min over the annulus of (3 |x| - x^2) / x^2 is 0.5, at |x| = 2
        assert report.rate_constant == pytest.approx(0.25)

    def test_insufficient_control(self, unstable):
        report = verify_clf_on_region(builtin_clf('quadratic', 1), unstable,
                                      box(-0.5, 0.5, 1, resolution=11),
                                      0.1, 2.0, 41,
                                      W=lambda x: 0.1 * float(x @ x))
        assert not report.passed
        assert all(abs(v['x'][0]) > 0.45 for v in report.violations)

    def test_artstein_fails_only_on_the_axis(self):
        from clfstab.nonsmooth_clf import artstein_clf
        report = verify_clf_on_region(artstein_clf(),
                                      zoo_build('artstein-circles'), None,
                                      0.2, 1.0, 21)
        assert not report.passed
        assert all(v['x'][0] == 0.0 for v in report.violations)
