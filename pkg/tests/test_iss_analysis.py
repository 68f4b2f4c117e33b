import numpy as np
import pytest
from numpy.testing import assert_allclose

from tests.context import clfstab  # noqa: F401
from clfstab.iss_analysis import (input_signal, simulate_with_input,
                                  ISSEstimate, check_iss_estimate,
                                  check_iiss_estimate,
                                  check_integral_estimate,
                                  candidate_from_expression, radial_function,
                                  verify_lyapunov_candidate,
                                  asymptotic_gain_probe, conjugate_system,
                                  rigid_body_coordinates, cascade_system,
                                  cascade_check, linear_gain)
from clfstab.comparison import exp_envelope, identity, power
from clfstab.systems import zoo_build, closed_loop_system
from clfstab.errors import (InvalidParams, InvalidCandidate, NotHurwitz,
                            InconsistentTransform, PreconditionFailed)


@pytest.fixture
def stable():
    return zoo_build('linear-1d', {'a': -1.0, 'b': 1.0})


def forced(sys, x0, text, t_end=10.0):
    return simulate_with_input(sys, [x0], input_signal(text, 1), t_end,
                               step=1e-2)


class TestSimulation:

    def test_forced_response(self, stable):
        traj = forced(stable, 2.0, 'constant:0.5')
        expected = 0.5 + 1.5 * np.exp(-traj.times)
        assert_allclose(traj.states[:, 0], expected, atol=1e-8)
        assert_allclose(traj.inputs[:, 0], 0.5)

    def test_gas_not_iss_escapes(self):
        traj = forced(zoo_build('gas-not-iss'), 0.0, 'constant:1')
        assert traj.escaped
        assert traj.escape_time < 5.0

    def test_gas_not_iss_without_input(self):
        traj = forced(zoo_build('gas-not-iss'), 3.0, 'zero')
        assert not traj.escaped
        assert abs(traj.states[-1, 0]) < 1e-3

    def test_rigid_body_feedback(self):
        sys = zoo_build('rigid-body-reduced')
        traj = simulate_with_input(sys, [0.5, 0.5, 0.5], None, 20.0,
                                   step=1e-2, feedback=sys.known_feedback)
        norms = traj.norms()
        assert not traj.escaped
        assert norms[-1] < 0.5
        assert norms[-1] < norms[0]

    def test_invalid_step(self, stable):
        with pytest.raises(InvalidParams):
            simulate_with_input(stable, [1.0], None, 1.0, step=0.0)


class TestEstimates:

    def test_iss_sum_form(self, stable):
        trajs = [forced(stable, 2.0, 'constant:0.5')]
        est = ISSEstimate(exp_envelope(identity(), 1.0), identity())
        assert check_iss_estimate(trajs, est).passed

    def test_iss_max_form_is_tighter(self, stable):
        trajs = [forced(stable, 2.0, 'constant:0.5')]
        est = ISSEstimate(exp_envelope(identity(), 1.0), identity(), 'max')
        report = check_iss_estimate(trajs, est)
        assert not report.passed
        assert all(v['time'] > 0 for v in report.violations)

    def test_estimate_needs_kl(self):
        with pytest.raises(InvalidParams):
            ISSEstimate(exp_envelope(identity(), 0.0), identity())
        with pytest.raises(InvalidParams):
            ISSEstimate(exp_envelope(identity(), 1.0), identity(), 'min')

    def test_iiss(self, stable):
        trajs = [forced(stable, 2.0, 'constant:0.5')]
        beta = exp_envelope(identity(), 1.0)
        assert check_iiss_estimate(trajs, beta, identity()).passed
        assert not check_iiss_estimate(trajs, beta,
                                       power(0.1, 1.0)).passed

    def test_integral_estimates(self, stable):
        trajs = [forced(stable, 2.0, 'constant:0.5'),
                 forced(stable, -1.0, 'sinusoid:1:2')]
        beta = exp_envelope(identity(), 1.0)
        assert check_integral_estimate(trajs, beta, 1.0).passed
        assert check_integral_estimate(trajs, beta, 1.0, 'l2', 'l2').passed
        assert not check_integral_estimate(trajs, beta, 0.0).passed

    def test_integral_estimate_arguments(self, stable):
        trajs = [forced(stable, 1.0, 'zero')]
        beta = exp_envelope(identity(), 1.0)
        with pytest.raises(InvalidParams):
            check_integral_estimate(trajs, beta, 1.0, 'l1')
        with pytest.raises(InvalidParams):
            check_integral_estimate(trajs, beta, -1.0)
        with pytest.raises(InvalidParams):
            check_integral_estimate(trajs, beta, 1.0, input_norm='linf')


class TestCandidates:

    states = np.linspace(-3.0, 3.0, 13)[:, None]
    inputs = np.linspace(-2.0, 2.0, 9)

    def test_arctan_iiss_candidate(self):
        # V' = x (u - atan x) / (1 + x^2) <= -alpha(|x|) + |u| / 2
        cand = candidate_from_expression(
            'log(1 + x1**2)/2', 1, 'iiss', 'r*atan(r)/(1 + r**2)', 'r/2')
        report = verify_lyapunov_candidate(cand, zoo_build('arctan-iiss'),
                                           self.states, self.inputs)
        assert report.passed
        assert report.checked == 13 * 9

    def test_arctan_rate_is_not_kinf(self):
        with pytest.raises(InvalidCandidate):
            candidate_from_expression('log(1 + x1**2)/2', 1, 'iss',
                                      'r*atan(r)/(1 + r**2)', 'r/2')

    def test_gain_too_small(self):
        cand = candidate_from_expression(
            'log(1 + x1**2)/2', 1, 'iiss', 'r*atan(r)/(1 + r**2)', 'r/4')
        report = verify_lyapunov_candidate(cand, zoo_build('arctan-iiss'),
                                           self.states, self.inputs)
        assert not report.passed

    def test_iss_and_implication(self, stable):
        iss = candidate_from_expression('x1**2/2', 1, 'iss', 'r**2/2',
                                        'r**2/2')
        assert verify_lyapunov_candidate(iss, stable, self.states,
                                         self.inputs).passed
        imp = candidate_from_expression('x1**2/2', 1, 'implication',
                                        'r**2/2', rho='2*r')
        assert verify_lyapunov_candidate(imp, stable, self.states,
                                         self.inputs).passed

    def test_unstable_system_fails(self):
        cand = candidate_from_expression('x1**2/2', 1, 'iss', 'r**2/2',
                                         'r**2/2')
        report = verify_lyapunov_candidate(cand, zoo_build('linear-1d'),
                                           self.states, self.inputs)
        assert not report.passed

    def test_form_requirements(self):
        with pytest.raises(InvalidCandidate):
            candidate_from_expression('x1**2', 1, 'iss', 'r**2')
        with pytest.raises(InvalidCandidate):
            candidate_from_expression('x1**2', 1, 'implication', 'r**2')
        with pytest.raises(InvalidCandidate):
            candidate_from_expression('x1**2', 1, 'strict', 'r**2', 'r')

    def test_radial_function(self):
        fn = radial_function('2*r')
        assert_allclose(fn(np.array([0.0, 1.5])), [0.0, 3.0])
        assert_allclose(radial_function('1 + 0*r')(np.array([1.0, 2.0])),
                        [1.0, 1.0])
        with pytest.raises(InvalidCandidate):
            radial_function('r + y')

    def test_dimension_mismatch(self, stable):
        cand = candidate_from_expression('x1**2 + x2**2', 2, 'iss', 'r**2',
                                         'r**2')
        with pytest.raises(InvalidParams):
            verify_lyapunov_candidate(cand, stable, self.states,
                                      self.inputs)


class TestGainProbe:

    def test_linear_gain_recovered(self, stable):
        inputs = [input_signal('constant:%g' % c, 1) for c in (0.5, 1, 2)]
        probe = asymptotic_gain_probe(stable, inputs, [[1.0], [-1.0]], 20.0,
                                      step=1e-2, threads=1)
        assert [r['escaped'] for r in probe.rows] == [False] * 3
        assert_allclose([r['limsup'] for r in probe.rows], [0.5, 1.0, 2.0],
                        rtol=1e-5)
        assert probe.gamma_hat(1.0) == pytest.approx(1.0, rel=1e-5)

    def test_escape_has_no_gain(self):
        inputs = [input_signal('constant:1', 1)]
        probe = asymptotic_gain_probe(zoo_build('gas-not-iss'), inputs,
                                      [[0.0]], 10.0, step=1e-2, threads=1)
        assert probe.rows[0]['escaped']
        assert probe.rows[0]['limsup'] is None
        assert probe.gamma_hat is None

    def test_tail_window(self, stable):
        inputs = [input_signal('zero', 1)]
        with pytest.raises(InvalidParams):
            asymptotic_gain_probe(stable, inputs, [[1.0]], 10.0,
                                  tail_fraction=0.1)
        with pytest.raises(InvalidParams):
            asymptotic_gain_probe(stable, [], [[1.0]], 10.0)


class TestCoordinates:

    def test_rigid_body_conjugate(self):
        sys = zoo_build('rigid-body-reduced')
        closed = closed_loop_system(sys, sys.known_feedback)
        T, T_inv, jac = rigid_body_coordinates()
        conj = conjugate_system(closed, T, T_inv, jacobian=jac)
        for z in np.random.default_rng(3).uniform(-1, 1, (10, 3)):
            dz = conj.f(z, np.zeros(2))
            assert dz[1] == pytest.approx(-z[1], abs=1e-9)
            assert dz[2] == pytest.approx(-z[2], abs=1e-9)

    def test_numeric_jacobian(self):
        sys = zoo_build('rigid-body-reduced')
        closed = closed_loop_system(sys, sys.known_feedback)
        T, T_inv, _ = rigid_body_coordinates()
        conj = conjugate_system(closed, T, T_inv)
        z = np.array([0.3, -0.2, 0.4])
        assert_allclose(conj.f(z, np.zeros(2))[1:], -z[1:], atol=1e-6)

    def test_bad_inverse(self):
        sys = zoo_build('rigid-body-reduced')
        T, _, _ = rigid_body_coordinates()
        with pytest.raises(InconsistentTransform):
            conjugate_system(sys, T, lambda x: np.asarray(x, float))

    def test_origin_must_be_fixed(self):
        sys = zoo_build('single-integrator', {'n': 2})
        with pytest.raises(InconsistentTransform):
            conjugate_system(sys, lambda z: np.asarray(z) + 1.0,
                             lambda x: np.asarray(x) - 1.0)


class TestCascades:

    @pytest.fixture
    def pair(self):
        driver = zoo_build('linear', {'A': [[-1.0]], 'B': [[0.0]]})
        driven = zoo_build('linear', {'A': [[-1.0]], 'B': [[1.0]]})
        return driver, driven

    def test_composite(self, pair):
        comp = cascade_system(*pair)
        assert comp.n == 2
        assert_allclose(comp.f(np.array([1.0, 2.0]), np.zeros(1)),
                        [-1.0, -1.0])

    def test_converges(self, pair):
        report = cascade_check(*pair, [[1.0, 1.0], [-1.0, 2.0]], 30.0,
                               step=1e-2, threads=1)
        assert report.converged
        assert report.max_tail < 1e-4

    def test_dimension_mismatch(self, pair):
        with pytest.raises(InvalidParams):
            cascade_system(pair[0], zoo_build('single-integrator',
                                              {'n': 2}))

    def test_candidate_preconditions(self, pair):
        cand = candidate_from_expression('x1**2/2', 1, 'iss', 'r**2/2',
                                         'r**2/2')
        grid = np.linspace(-2, 2, 9)[:, None]
        report = cascade_check(*pair, [[1.0, 1.0]], 30.0, step=1e-2,
                               candidates=[(cand, pair[1], grid,
                                            np.linspace(-1, 1, 5))])
        assert len(report.preconditions) == 1
        with pytest.raises(PreconditionFailed):
            cascade_check(*pair, [[1.0, 1.0]], 30.0, step=1e-2,
                          candidates=[(cand, zoo_build('linear-1d'), grid,
                                       np.linspace(-1, 1, 5))])


class TestLinearGain:

    @pytest.mark.parametrize('A, B, gain', [([[-1.0]], [[1.0]], 1.0),
                                            ([[-2.0]], [[3.0]], 1.5)])
    def test_scalar(self, A, B, gain):
        assert linear_gain(A, B) == pytest.approx(gain, rel=1e-8)

    def test_diagonal(self):
        assert linear_gain(np.diag([-1.0, -4.0]), np.eye(2)) == \
            pytest.approx(1.0, rel=1e-8)

    @pytest.mark.parametrize('A', [[[1.0]], [[0.0]]])
    def test_not_hurwitz(self, A):
        with pytest.raises(NotHurwitz):
            linear_gain(A, [[1.0]])
