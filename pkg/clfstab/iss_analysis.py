'''
    Input-to-state stability tooling: checking ISS and iISS estimates on
    simulated bundles, verifying ISS/iISS-Lyapunov candidates on grids,
    probing asymptotic gains, coordinate changes, cascades and the gain of
    stable linear systems.

    Methods:
    --------
    simulate_with_input(sys, x0, u, t_end): x' = f(x, u(t)), optionally
    closed through a feedback.

    check_iss_estimate(trajs, est): |x(t)| <= beta(|x0|, t) (+ or max)
    gamma(sup |u|).

    check_iiss_estimate(trajs, beta, gamma): |x(t)| <= beta(|x0|, t) +
    int_0^t gamma(|u|).

    check_integral_estimate(trajs, beta, gain, state_norm, input_norm):
    Linear estimates with pointwise/L2 state norms and sup/L1/L2 inputs.

    verify_lyapunov_candidate(cand, sys, states, inputs): Dissipation
    inequality on a grid.

    asymptotic_gain_probe(sys, inputs, x0s, horizon): Tail-window limsup
    per input and the fitted gain.

    conjugate_system(sys, T, T_inv, S, S_inv): z-system for x = T(z).

    cascade_check(driver, driven, x0s, horizon): Convergence of a cascade.

    linear_gain(A, B): ||B|| int_0^inf ||e^{tA}|| dt.
'''


from math import ceil
from logging import info

import numpy as np
import sympy as sp
from scipy.integrate import quad, cumulative_trapezoid
from scipy.linalg import expm

from clfstab.model import Model
from clfstab.consts import CHECK_TOL, INVERSE_TOL
from clfstab.errors import (InvalidParams, InvalidCandidate, NotHurwitz,
                            InconsistentTransform, NonFiniteState,
                            PreconditionFailed)
from clfstab.systems import ControlSystem, Trajectory, closed_loop_system
from clfstab.signals import Signal, parse_signal
from clfstab.comparison import (KFunction, KLFunction, EnvelopeReport,
                                envelope_rows, merge_rows, fit_k_envelope)
from clfstab.clf_smooth import VerificationReport, clf_from_expression
from clfstab.sampling_sim import rk4_step, escaped_state
from clfstab.utils import as_vector, parallel_map
from clfstab import config


TAIL_FRACTION = config.get_float('ANALYSIS_TAIL_FRACTION', 0.25)
CLASSICAL_STEP = config.get_float('SIMULATION_CLASSICAL_STEP', 1e-3)
BLOWUP_BOUND = config.get_float('SIMULATION_BLOWUP_BOUND', 1e6)


# ==============
#     INPUTS
# ==============


class InputSignal(Model):
    '''
        Exogenous input u(t) on [0, horizon].

        Attributes:
        -----------
        signal: Generator (zero, constant, sinusoid, piecewise, pulse).

        horizon: Time horizon the input is used on.
    '''

    def __init__(self, signal: Signal, horizon: float = np.inf):
        self.signal = signal
        self.horizon = float(horizon)

    @property
    def dim(self) -> int:
        return self.signal.dim

    @property
    def sup_norm(self) -> float:
        return self.signal.sup_norm

    def __call__(self, t: float, x=None) -> np.ndarray:
        return self.signal(t, x)

    @classmethod
    def from_dict(cls, d: dict):
        return cls(Signal.from_dict(d['signal']), d.get('horizon', np.inf))


def input_signal(text: str, m: int, horizon: float = np.inf) -> InputSignal:
    return InputSignal(parse_signal(text, m), horizon)


def simulate_with_input(sys: ControlSystem, x0, u: InputSignal = None,
                        t_end: float = 10.0, step: float = None,
                        feedback=None, blowup: float = None, id=0
                        ) -> Trajectory:
    '''
        Fixed-step RK4 solution of x' = f(x, u(t)), or of
        x' = f(x, k(x) + u(t)) when a feedback is given. Inputs are recorded
        at the output times.
    '''

    if feedback is not None:
        sys = closed_loop_system(sys, feedback)
    step = CLASSICAL_STEP if step is None else float(step)
    blowup = BLOWUP_BOUND if blowup is None else float(blowup)
    if not (step > 0 and t_end > 0):
        raise InvalidParams('step and horizon must be positive')
    zero_input = np.zeros(sys.m)
    source = u.signal if u is not None else None
    count = max(1, ceil(t_end / step - 1e-12))
    dt = t_end / count
    f = sys.f
    x = as_vector(x0, sys.n, 'initial state').copy()

    def inp(t):
        return zero_input if source is None else source(t)

    def rhs(t, y):
        return np.asarray(f(y, inp(t)), float).reshape(sys.n)

    times, states, inputs = [0.0], [x.copy()], [inp(0.0)]
    escaped, escape_time = False, None
    for i in range(count):
        t = i * dt
        k1 = rhs(t, x)
        if not np.all(np.isfinite(k1)):
            raise NonFiniteState('%s: non-finite dynamics at t=%g'
                                 % (sys.name, t), t=t, x=x)
        with np.errstate(over='ignore', invalid='ignore'):
            nxt = rk4_step(rhs, t, x, dt, k1)
        t_next = t_end if i == count - 1 else (i + 1) * dt
        if escaped_state(nxt, blowup):
            escaped, escape_time = True, float(t_next)
            break
        x = nxt
        times.append(t_next)
        states.append(x.copy())
        inputs.append(inp(t_next))
    if escaped:
        info('iss_analysis: %s escaped at t=%g', sys.name, escape_time)
    return Trajectory(id, times, states, inputs=np.array(inputs),
                      escaped=escaped, escape_time=escape_time)


def _input_norms(traj: Trajectory) -> np.ndarray:
    if traj.inputs is None or np.size(traj.inputs) == 0:
        raise InvalidParams('trajectory %s carries no input record'
                            % traj.id)
    inputs = np.asarray(traj.inputs, float).reshape(traj.times.size, -1)
    return np.linalg.norm(inputs, axis=1)


# =================
#     ESTIMATES
# =================


class ISSEstimate(Model):
    '''
        ISS estimate |x(t)| <= beta(|x0|, t) (+ | max) gamma(sup |u|).

        Attributes:
        -----------
        beta: KLFunction.

        gamma: KFunction.

        form: 'max' or 'sum'.
    '''

    def __init__(self, beta: KLFunction, gamma: KFunction,
                 form: str = 'sum'):
        if form not in ('max', 'sum'):
            raise InvalidParams('estimate form must be max or sum')
        if not beta.is_class_kl():
            raise InvalidParams('beta is not of class KL')
        self.beta = beta
        self.gamma = gamma
        self.form = form

    def bound(self, s: float, times, sup_u) -> np.ndarray:
        b = np.asarray(self.beta(s, times), float)
        g = np.asarray(self.gamma(sup_u), float)
        return np.maximum(b, g) if self.form == 'max' else b + g

    @classmethod
    def from_dict(cls, d: dict):
        return cls(KLFunction.from_dict(d['beta']),
                   KFunction.from_dict(d['gamma']), d.get('form', 'sum'))


def check_iss_estimate(trajs: list, est: ISSEstimate) -> EnvelopeReport:
    '''
        Flags times where |x(t)| exceeds the ISS bound, the input entering
        through its running sup.
    '''

    def one(traj):
        sup_u = np.maximum.accumulate(_input_norms(traj))
        rows, ratio = envelope_rows(traj.id, traj.times, traj.norms(),
                                    est.bound(traj.x0_norm, traj.times,
                                              sup_u))
        return rows, ratio, traj.times.size

    return merge_rows(parallel_map(one, trajs))


def check_iiss_estimate(trajs: list, beta: KLFunction, gamma: KFunction
                        ) -> EnvelopeReport:
    '''
        Flags times where |x(t)| > beta(|x0|, t) + int_0^t gamma(|u|) ds,
        the integral taken by the trapezoid rule on the output times.
    '''

    def one(traj):
        energy = cumulative_trapezoid(np.asarray(gamma(_input_norms(traj)),
                                                 float),
                                      traj.times, initial=0.0)
        bounds = np.asarray(beta(traj.x0_norm, traj.times), float) + energy
        rows, ratio = envelope_rows(traj.id, traj.times, traj.norms(),
                                    bounds)
        return rows, ratio, traj.times.size

    return merge_rows(parallel_map(one, trajs))


def _running_norm(times, norms, kind: str) -> np.ndarray:
    if kind == 'sup':
        return np.maximum.accumulate(norms)
    if kind == 'l1':
        return cumulative_trapezoid(norms, times, initial=0.0)
    if kind == 'l2':
        return np.sqrt(cumulative_trapezoid(norms ** 2, times, initial=0.0))
    raise InvalidParams('unknown norm %r' % kind)


def check_integral_estimate(trajs: list, beta: KLFunction, gain: float,
                            state_norm: str = 'pointwise',
                            input_norm: str = 'sup') -> EnvelopeReport:
    '''
        Generic linear estimate: S(t) <= beta(|x0|, t) + gain N(t), where
        S is |x(t)| ('pointwise') or (int_0^t |x|^2)^(1/2) ('l2'), and N
        is the running sup, L1 or L2 norm of the input. With the l2 state
        norm the transient term is beta(|x0|, 0).
    '''

    if state_norm not in ('pointwise', 'l2'):
        raise InvalidParams('state norm must be pointwise or l2')
    if gain < 0:
        raise InvalidParams('gain must be >= 0')

    def one(traj):
        term = _running_norm(traj.times, _input_norms(traj), input_norm)
        norms = traj.norms()
        if state_norm == 'l2':
            lhs = _running_norm(traj.times, norms, 'l2')
            transient = np.full(traj.times.size,
                                float(beta(traj.x0_norm, 0.0)))
        else:
            lhs = norms
            transient = np.asarray(beta(traj.x0_norm, traj.times), float)
        rows, ratio = envelope_rows(traj.id, traj.times, lhs,
                                    transient + gain * term)
        return rows, ratio, traj.times.size

    return merge_rows(parallel_map(one, trajs))


# ==================
#     CANDIDATES
# ==================


def _is_class_kinf(alpha) -> bool:
    if isinstance(alpha, KFunction):
        return alpha.is_class_kinf()
    r = np.concatenate([[0.0], np.logspace(-3, 6, 200)])
    vals = np.asarray([float(alpha(s)) for s in r])
    return (vals[0] == 0.0 and bool(np.all(np.diff(vals) > 0))
            and vals[-1] >= 10 * float(alpha(1.0)))


def _is_positive_definite(alpha) -> bool:
    r = np.logspace(-3, 3, 100)
    return (float(alpha(0.0)) == 0.0
            and all(float(alpha(s)) > 0 for s in r))


class LyapunovCandidate(Model):
    '''
        ISS/iISS-Lyapunov candidate with a declared dissipation form:

            iss:         V' <= -alpha(|x|) + gamma(|u|), alpha class K-inf
            iiss:        V' <= -alpha(|x|) + gamma(|u|), alpha pos. definite
            implication: |x| >= rho(|u|)  =>  V' <= -alpha(|x|)

        Raises InvalidCandidate when the rate does not match its form.
    '''

    FORMS = ('iss', 'iiss', 'implication')

    _transient = ('V', 'grad', 'alpha', 'gamma', 'rho')

    def __init__(self, name: str, n: int, V, grad, form: str, alpha,
                 gamma=None, rho=None, expression: dict = None):
        if form not in self.FORMS:
            raise InvalidCandidate('unknown dissipation form %r' % form)
        if form == 'iss' and not _is_class_kinf(alpha):
            raise InvalidCandidate('iss form needs a class K-infinity '
                                   'rate alpha')
        if form == 'iiss' and not _is_positive_definite(alpha):
            raise InvalidCandidate('iiss form needs a positive definite '
                                   'rate alpha')
        if form in ('iss', 'iiss') and gamma is None:
            raise InvalidCandidate('%s form needs a gain gamma' % form)
        if form == 'implication' and rho is None:
            raise InvalidCandidate('implication form needs rho')
        self.name = name
        self.n = int(n)
        self.V = V
        self.grad = grad
        self.form = form
        self.alpha = alpha
        self.gamma = gamma
        self.rho = rho
        self.expression = expression

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        d = super().as_dict(flat, _prefix)
        for name in ('alpha', 'gamma', 'rho'):
            fn = getattr(self, name)
            if isinstance(fn, KFunction):
                d[name] = fn.as_dict()
        return d


def radial_function(spec):
    '''
        KFunction from its dict form, or a vectorized callable from a
        sympy expression in r.
    '''

    if spec is None or isinstance(spec, KFunction):
        return spec
    if isinstance(spec, dict):
        return KFunction.from_dict(spec)
    r = sp.Symbol('r')
    try:
        expr = sp.sympify(spec, locals={'r': r})
    except (sp.SympifyError, TypeError, SyntaxError) as e:
        raise InvalidCandidate('cannot parse rate %r (%s)' % (spec, e))
    if not expr.free_symbols <= {r}:
        raise InvalidCandidate('rate %r may only depend on r' % spec)
    fn = sp.lambdify(r, expr, 'numpy')
    return lambda s: (np.asarray(fn(np.asarray(s, float)), float)
                      + np.zeros_like(np.asarray(s, float)))


def candidate_from_expression(V: str, n: int, form: str, alpha, gamma=None,
                              rho=None) -> LyapunovCandidate:
    clf = clf_from_expression(V, n)
    return LyapunovCandidate(clf.name, n, clf.V, clf.grad, form,
                             radial_function(alpha), radial_function(gamma),
                             radial_function(rho),
                             expression={'V': clf.expression['V'],
                                         'alpha': alpha, 'gamma': gamma,
                                         'rho': rho})


def verify_lyapunov_candidate(cand: LyapunovCandidate, sys: ControlSystem,
                              states, inputs) -> VerificationReport:
    '''
        Checks the declared dissipation inequality at every (state, input)
        grid pair, V' = grad V(x) . f(x, u), with tolerance
        1e-9 (1 + |terms|).
    '''

    states = np.atleast_2d(np.asarray(states, float))
    inputs = np.asarray(inputs, float).reshape(-1, sys.m)
    if states.shape[1] != sys.n or cand.n != sys.n:
        raise InvalidParams('candidate, grid and system dimensions differ')
    if states.shape[0] == 0 or inputs.shape[0] == 0:
        raise InvalidParams('empty state or input grid')
    unorm = np.linalg.norm(inputs, axis=1)
    gam = (np.asarray(cand.gamma(unorm), float) * np.ones_like(unorm)
           if cand.gamma is not None else None)
    rho = (np.asarray(cand.rho(unorm), float) * np.ones_like(unorm)
           if cand.rho is not None else None)

    def one(x):
        vdot = sys.eval_batch(x[None, :], inputs) @ np.asarray(
            cand.grad(x), float).reshape(sys.n)
        nx = float(np.linalg.norm(x))
        decay = float(cand.alpha(nx))
        if cand.form == 'implication':
            active = nx >= rho
            bound = np.full(unorm.shape, -decay)
        else:
            active = np.ones(unorm.shape, bool)
            bound = -decay + gam
        tol = CHECK_TOL * (1 + np.abs(vdot) + np.abs(bound))
        bad = np.flatnonzero(active & (vdot > bound + tol))
        rows = [{'x': x.tolist(), 'u': inputs[j].tolist(),
                 'vdot': float(vdot[j]), 'bound': float(bound[j])}
                for j in bad]
        slack = vdot - bound
        worst = float(slack[active].max()) if np.any(active) else None
        return rows, worst

    parts = parallel_map(one, states)
    violations = [row for rows, _ in parts for row in rows]
    slacks = [w for _, w in parts if w is not None]
    info('iss_analysis: candidate %s (%s form) on %s: %d violations over '
         '%d pairs', cand.name, cand.form, sys.name, len(violations),
         states.shape[0] * inputs.shape[0])
    return VerificationReport(violations, states.shape[0] * inputs.shape[0],
                              {'form': cand.form, 'states': states.shape[0],
                               'inputs': inputs.shape[0]},
                              None, max(slacks) if slacks else None)


# ==================
#     GAIN PROBE
# ==================


class GainProbe(Model):
    '''
        Asymptotic-gain probe result.

        Attributes:
        -----------
        rows: One row per input: amplitude (sup norm), limsup estimate
        (None when a trajectory escaped) and escape flag.

        gamma_hat: Fitted piecewise-linear gain, None if fewer than one
        finite positive amplitude.

        tail_fraction: Tail window as a fraction of the horizon.
    '''

    def __init__(self, rows: list, gamma_hat: KFunction = None,
                 tail_fraction: float = TAIL_FRACTION, horizon: float = None):
        self.rows = list(rows)
        self.gamma_hat = gamma_hat
        self.tail_fraction = float(tail_fraction)
        self.horizon = horizon

    @classmethod
    def from_dict(cls, d: dict):
        g = d.get('gamma_hat')
        return cls(d['rows'], KFunction.from_dict(g) if g else None,
                   d.get('tail_fraction', TAIL_FRACTION), d.get('horizon'))


def asymptotic_gain_probe(sys: ControlSystem, inputs: list, x0s,
                          horizon: float, tail_fraction: float = None,
                          feedback=None, step: float = None,
                          threads: int = None) -> GainProbe:
    '''
        For each input estimates limsup |x(t)| as the largest norm over the
        tail window, across all initial states. An escape yields no finite
        gain for that amplitude.
    '''

    tail_fraction = TAIL_FRACTION if tail_fraction is None else tail_fraction
    if not 0.2 <= tail_fraction < 1:
        raise InvalidParams('tail window must cover at least 20% of the '
                            'horizon')
    if not inputs:
        raise InvalidParams('no inputs to probe')
    x0s = np.atleast_2d(np.asarray(x0s, float))
    start = (1 - tail_fraction) * horizon
    cells = [(i, x0) for i in range(len(inputs)) for x0 in x0s]

    def one(cell):
        i, x0 = cell
        traj = simulate_with_input(sys, x0, inputs[i], horizon, step,
                                   feedback)
        if traj.escaped:
            return None
        return float(traj.norms()[traj.times >= start].max())

    tails = parallel_map(one, cells, threads)
    rows = []
    for i, u in enumerate(inputs):
        mine = tails[i * len(x0s):(i + 1) * len(x0s)]
        escaped = any(t is None for t in mine)
        rows.append({'input': i, 'signal': u.signal.kind,
                     'amplitude': u.sup_norm,
                     'limsup': None if escaped else max(mine),
                     'escaped': escaped})
    finite = [(r['amplitude'], r['limsup']) for r in rows
              if r['limsup'] is not None and r['amplitude'] > 0]
    gamma_hat = (fit_k_envelope([a for a, _ in finite],
                                [v for _, v in finite]) if finite else None)
    return GainProbe(rows, gamma_hat, tail_fraction, horizon)


# ==========================
#     COORDINATE CHANGES
# ==========================


def _numeric_jacobian(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    n = x.size
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (np.asarray(fn(x + e), float)
                   - np.asarray(fn(x - e), float)) / (2 * h)
    return J


def _check_inverse(fwd, inv, dim: int, what: str, samples: int,
                   radius: float, seed: int):
    if np.linalg.norm(np.asarray(fwd(np.zeros(dim)), float)) > 1e-12:
        raise InconsistentTransform('%s does not fix the origin' % what)
    for z in np.random.default_rng(seed).uniform(-radius, radius,
                                                 (samples, dim)):
        back = np.asarray(inv(np.asarray(fwd(z), float)), float)
        if np.linalg.norm(back - z) > INVERSE_TOL * (1 + np.linalg.norm(z)):
            raise InconsistentTransform('%s inverse check failed at %s'
                                        % (what, z.tolist()), z=z)


def conjugate_system(sys: ControlSystem, T, T_inv, S=None, S_inv=None,
                     jacobian=None, samples: int = 16, radius: float = 1.0,
                     seed: int = 0, name: str = None) -> ControlSystem:
    '''
        z' = D T_inv(T(z)) f(T(z), S(v)) for the change of variables
        x = T(z), u = S(v). jacobian, if given, is x -> D T_inv(x);
        otherwise central differences are used.

        Raises InconsistentTransform if T or S does not fix the origin or
        fails the inverse check at sampled points.
    '''

    S = S or (lambda v: np.asarray(v, float))
    S_inv = S_inv or (lambda u: np.asarray(u, float))
    _check_inverse(T, T_inv, sys.n, 'T', samples, radius, seed)
    _check_inverse(S, S_inv, sys.m, 'S', samples, radius, seed + 1)
    jac = jacobian or (lambda x: _numeric_jacobian(T_inv, x))

    def one(z, v):
        x = np.asarray(T(z), float)
        u = np.asarray(S(v), float)
        return np.asarray(jac(x), float) @ np.asarray(sys.f(x, u), float)

    def f(z, v):
        z = np.asarray(z, float)
        v = np.asarray(v, float)
        if z.ndim == 1 and v.ndim == 1:
            return one(z, v)
        shape = np.broadcast_shapes(z.shape[:-1], v.shape[:-1])
        zb = np.broadcast_to(z, shape + (sys.n,)).reshape(-1, sys.n)
        vb = np.broadcast_to(v, shape + (sys.m,)).reshape(-1, sys.m)
        return np.array([one(a, b) for a, b in zip(zb, vb)]).reshape(
            shape + (sys.n,))

    return ControlSystem(name or sys.name + '-conjugate', sys.n, sys.m, f,
                         control_set=sys.control_set, params=sys.params,
                         description='conjugate of %s under x = T(z)'
                         % sys.name)


def rigid_body_coordinates():
    '''
        (T, T_inv, D T_inv) for x = T(z) with z2 = x1 + x2, z3 = x3 - x1^2.
    '''

    def T(z):
        z1, z2, z3 = np.asarray(z, float)
        return np.array([z1, z2 - z1, z3 + z1 ** 2])

    def T_inv(x):
        x1, x2, x3 = np.asarray(x, float)
        return np.array([x1, x1 + x2, x3 - x1 ** 2])

    def jacobian(x):
        x1 = float(np.asarray(x, float)[0])
        return np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0],
                         [-2 * x1, 0.0, 1.0]])

    return T, T_inv, jacobian


# ================
#     CASCADES
# ================


class CascadeReport(Model):
    '''
        Cascade convergence check.

        Attributes:
        -----------
        rows: One row per initial state: escape, tail max and final norm.

        max_tail: Largest tail-window norm over non-escaped runs.

        converged: No escape and max_tail below the tolerance.

        preconditions: Verification reports of the supplied candidates.
    '''

    def __init__(self, rows: list, max_tail: float, converged: bool,
                 tol: float, preconditions: list = None):
        self.rows = list(rows)
        self.max_tail = max_tail
        self.converged = bool(converged)
        self.tol = float(tol)
        self.preconditions = list(preconditions or [])


def cascade_system(driver: ControlSystem, driven: ControlSystem
                   ) -> ControlSystem:
    '''
        Composite (x, z) with x' = g(x, 0) and z' = f(z, x).
    '''

    if driven.m != driver.n:
        raise InvalidParams('driven input dimension %d differs from the '
                            'driver state dimension %d'
                            % (driven.m, driver.n))
    n1, n2 = driver.n, driven.n
    zero = np.zeros(driver.m)

    def f(y, v):
        y = np.asarray(y, float)
        x, z = y[:n1], y[n1:]
        return np.concatenate([
            np.asarray(driver.f(x, zero), float).reshape(n1),
            np.asarray(driven.f(z, x), float).reshape(n2)])

    return ControlSystem('%s>%s' % (driver.name, driven.name), n1 + n2, 1, f,
                         description='cascade of %s driving %s'
                         % (driver.name, driven.name))


def cascade_check(driver: ControlSystem, driven: ControlSystem, x0s,
                  horizon: float = 30.0, step: float = None,
                  tail_fraction: float = None, tol: float = 1e-4,
                  candidates: list = None, threads: int = None
                  ) -> CascadeReport:
    '''
        Simulates the cascade with zero input from every initial state
        (x0 stacked over z0) and checks convergence to 0. candidates is a
        list of (LyapunovCandidate, system, states, inputs) that must verify
        first.

        Raises PreconditionFailed if a candidate fails verification.
    '''

    tail_fraction = TAIL_FRACTION if tail_fraction is None else tail_fraction
    checks = []
    for cand, sys, states, inputs in candidates or []:
        report = verify_lyapunov_candidate(cand, sys, states, inputs)
        if not report.passed:
            raise PreconditionFailed('candidate %s fails on %s'
                                     % (cand.name, sys.name))
        checks.append(report.as_dict())
    composite = cascade_system(driver, driven)
    x0s = np.atleast_2d(np.asarray(x0s, float))
    start = (1 - tail_fraction) * horizon

    def one(x0):
        traj = simulate_with_input(composite, x0, None, horizon, step)
        norms = traj.norms()
        return {'x0': x0.tolist(), 'escaped': traj.escaped,
                'escape_time': traj.escape_time,
                'tail_max': (None if traj.escaped
                             else float(norms[traj.times >= start].max())),
                'final_norm': float(norms[-1])}

    rows = parallel_map(one, x0s, threads)
    tails = [r['tail_max'] for r in rows if r['tail_max'] is not None]
    max_tail = max(tails) if tails else None
    converged = (all(not r['escaped'] for r in rows)
                 and max_tail is not None and max_tail < tol)
    info('iss_analysis: cascade %s converged=%s max tail %s',
         composite.name, converged, max_tail)
    return CascadeReport(rows, max_tail, converged, tol, checks)


# ===================
#     LINEAR GAIN
# ===================


def linear_gain(A, B) -> float:
    '''
        ||B||_2 int_0^inf ||e^{tA}||_2 dt for Hurwitz A. The integral is
        taken by adaptive quadrature over doubling windows until the last
        window adds less than 1e-10 of the total.

        Raises NotHurwitz if an eigenvalue has nonnegative real part.
    '''

    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    if B.shape[0] != A.shape[0]:
        B = B.T
    if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
        raise InvalidParams('A is %s and B is %s' % (A.shape, B.shape))
    rate = float(np.max(np.linalg.eigvals(A).real))
    if rate >= 0:
        raise NotHurwitz('A has an eigenvalue with real part %g' % rate)

    def norm(t):
        return float(np.linalg.norm(expm(t * A), 2))

    lo, hi = 0.0, 10.0 / abs(rate)
    total = 0.0
    for _ in range(60):
        part = quad(norm, lo, hi, limit=200, epsabs=1e-13, epsrel=1e-10)[0]
        total += part
        if part <= 1e-10 * total:
            break
        lo, hi = hi, 2 * hi
    return float(np.linalg.norm(B, 2)) * total
