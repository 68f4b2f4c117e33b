'''
    Smooth control-Lyapunov functions, the universal formula, pointwise-min
    feedback, and grid verification of the CLF decrease condition.

    Classes:
    --------
    SmoothCLF: V, its gradient, an optional decrease rate W and properness
    sandwich.

    FeedbackLaw: State feedback x -> u with its continuity class and
    provenance.

    VerificationReport: Grid points where the decrease condition fails.

    Methods:
    --------
    universal_formula_feedback(clf, sys): Universal formula (|b|^4 form for
    m > 1).

    pointwise_min_feedback(clf, sys, U0): argmin over the U0 grid of
    grad V(x) . f(x, u).

    clf_decrease_margin(clf, sys, U0, x): min over the U0 grid of
    grad V(x) . f(x, u).

    verify_clf_on_region(clf, sys, U0, r, R, grid_resolution): Decrease
    condition on the annulus r <= |x| <= R.

    feedback_from_expression(text, n, m): User feedback from expressions in
    x1..xn.
'''


from logging import info, warning

import numpy as np
import sympy as sp

from clfstab.model import Model
from clfstab.consts import (CHECK_TOL, SMOOTH, CONTINUOUS, DISCONTINUOUS,
                            UNIVERSAL, POINTWISE_MIN, USER)
from clfstab.errors import (NotAffine, CLFPremiseViolated, InvalidParams,
                            InvalidCLF, DimensionMismatch)
from clfstab.systems import (ControlSystem, ControlSet, affine_parts,
                             grid_argmin)
from clfstab.comparison import power
from clfstab.utils import as_vector, parallel_map


class SmoothCLF(Model):
    '''
        Smooth control-Lyapunov function candidate.

        Attributes:
        -----------
        name: Identifier (built-in name or expression).

        n: State dimension.

        V: x -> V(x) >= 0.

        grad: x -> gradient of V.

        W: Optional positive-definite decrease rate.

        sandwich: Optional (lower, upper) KFunctions with
        lower(|x|) <= V(x) <= upper(|x|).

        small_control: True if the CLF has the small control property.
    '''

    _transient = ('V', 'grad', 'W')

    def __init__(self, name: str, n: int, V, grad, W=None,
                 sandwich: tuple = None, small_control: bool = False,
                 expression: dict = None):
        self.name = name
        self.n = int(n)
        self.V = V
        self.grad = grad
        self.W = W
        self.sandwich = sandwich
        self.small_control = bool(small_control)
        self.expression = expression

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        d = {'name': self.name, 'n': self.n,
             'small_control': self.small_control,
             'has_rate': self.W is not None}
        if self.sandwich:
            d['sandwich'] = [k.as_dict() for k in self.sandwich]
        if self.expression:
            d['expression'] = self.expression
        return d


class FeedbackLaw(Model):
    '''
        State feedback u = k(x). k(0) = 0 is enforced.

        Attributes:
        -----------
        k: x -> u.

        m: Control dimension.

        continuity_class: 'smooth', 'continuous' or
        'measurable-discontinuous'.

        provenance: 'universal-formula', 'pointwise-min', 'proximal' or
        'user'.

        control_set: Optional ControlSet the values lie in.

        batch: Optional (N, n) -> (N, m) form of k.
    '''

    _transient = ('k', 'batch')

    def __init__(self, k, m: int, continuity_class: str, provenance: str,
                 control_set: ControlSet = None, name: str = '',
                 batch=None):
        if continuity_class not in (SMOOTH, CONTINUOUS, DISCONTINUOUS):
            raise InvalidParams('unknown continuity class %r'
                                % continuity_class)
        self.k = k
        self.m = int(m)
        self.continuity_class = continuity_class
        self.provenance = provenance
        self.control_set = control_set
        self.name = name or provenance
        self.batch = batch

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float).reshape(-1)
        if not np.any(x):
            return np.zeros(self.m)
        return as_vector(self.k(x), self.m, 'control')

    def rows(self, X) -> np.ndarray:
        '''
            k on every row of X (N, n), zero rows mapped to 0.
        '''

        X = np.atleast_2d(np.asarray(X, float))
        if self.batch is None:
            return np.array([self(x) for x in X]).reshape(-1, self.m)
        U = np.array(self.batch(X), float).reshape(-1, self.m)
        U[~np.any(X, axis=1)] = 0.0
        return U


def known_feedback(sys: ControlSystem) -> FeedbackLaw:
    '''
        The stabilizing feedback the zoo records for sys.
    '''

    if sys.known_feedback is None:
        raise InvalidParams('%s has no recorded feedback' % sys.name)
    continuity = CONTINUOUS if sys.name == 'cubic-1d' else SMOOTH
    return FeedbackLaw(sys.known_feedback, sys.m, continuity, USER,
                       name='known')


def zero_feedback(m: int) -> FeedbackLaw:
    return FeedbackLaw(lambda x: np.zeros(m), m, SMOOTH, USER, name='zero')


def constant_feedback(value) -> FeedbackLaw:
    '''
        Open-loop constant control; k(0) = 0 is not enforced.
    '''

    return _ConstantLaw(np.atleast_1d(np.asarray(value, float)))


class _ConstantLaw(FeedbackLaw):

    def __init__(self, value: np.ndarray):
        super().__init__(lambda x: value.copy(), value.size, SMOOTH, USER,
                         name='constant')
        self.value = value.tolist()

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.value, float)


# =================
#     SYNTHESIS
# =================


def _objective(clf, sys: ControlSystem, grid: np.ndarray, x: np.ndarray
               ) -> np.ndarray:
    g = np.asarray(clf.grad(x), float).reshape(sys.n)
    return sys.eval_batch(x[None, :], grid) @ g


def universal_formula_feedback(clf: SmoothCLF, sys: ControlSystem
                               ) -> FeedbackLaw:
    '''
        k(x) = -[(a + sqrt(a^2 + |b|^4)) / |b|^2] b with a = grad V . f0 and
        b = G^T grad V, and k(x) = 0 where b = 0.

        Raises NotAffine for systems without the control-affine form. The
        returned law raises CLFPremiseViolated at states x != 0 with b = 0
        and a >= 0.
    '''

    if not sys.affine:
        raise NotAffine('universal formula needs a control-affine system, '
                        '%s is not' % sys.name)
    if clf.n != sys.n:
        raise DimensionMismatch('CLF dimension %d, system dimension %d'
                                % (clf.n, sys.n))
    if not clf.small_control:
        warning(' *** WARNING in clf_smooth: %s lacks the small control '
                'property; the universal formula may be discontinuous at 0 '
                'on %s.', clf.name, sys.name)

    def k(x):
        x = as_vector(x, sys.n, 'state')
        f0, G = affine_parts(sys, x)
        g = np.asarray(clf.grad(x), float).reshape(sys.n)
        a = float(g @ f0)
        b = G.T @ g
        bb = float(b @ b)
        if bb == 0.0:
            if a >= 0:
                raise CLFPremiseViolated(
                    'b(x) = 0 and a(x) = %g >= 0 at x = %s' % (a, x.tolist()),
                    x=x)
            return np.zeros(sys.m)
        root = np.sqrt(a * a + bb * bb)
        coef = (a + root) / bb if a >= 0 else bb / (root - a)
        return -coef * b

    return FeedbackLaw(k, sys.m, CONTINUOUS, UNIVERSAL)


def pointwise_min_feedback(clf: SmoothCLF, sys: ControlSystem,
                           U0: ControlSet = None) -> FeedbackLaw:
    '''
        k(x) = argmin over the U0 grid of grad V(x) . f(x, u); ties go to the
        smallest |u|, then lexicographic order. k(0) = 0.
    '''

    U0 = U0 or sys.control_set
    grid = U0.grid()

    def k(x):
        x = as_vector(x, sys.n, 'state')
        return grid[grid_argmin(_objective(clf, sys, grid, x))].copy()

    return FeedbackLaw(k, sys.m, DISCONTINUOUS, POINTWISE_MIN, U0)


def clf_decrease_margin(clf: SmoothCLF, sys: ControlSystem,
                        U0: ControlSet, x) -> float:
    '''
        min over the U0 grid of grad V(x) . f(x, u), to compare with -W(x).

        Raises InvalidParams at x = 0.
    '''

    x = as_vector(x, sys.n, 'state')
    if not np.any(x):
        raise InvalidParams('decrease margin is undefined at x = 0')
    U0 = U0 or sys.control_set
    return float(_objective(clf, sys, U0.grid(), x).min())


# ====================
#     VERIFICATION
# ====================


class VerificationReport(Model):
    '''
        Grid verification of a decrease condition.

        Attributes:
        -----------
        violations: Rows {x, margin, bound}.

        checked: Number of grid points checked.

        region: {r, R, grid_resolution}.

        rate_constant: c of the default rate W(x) = c |x|^2 when none was
        given, else None.
    '''

    def __init__(self, violations: list = None, checked: int = 0,
                 region: dict = None, rate_constant: float = None,
                 worst_slack: float = None):
        self.violations = list(violations or [])
        self.checked = int(checked)
        self.region = dict(region or {})
        self.rate_constant = rate_constant
        self.worst_slack = worst_slack

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        d = super().as_dict(flat, _prefix)
        d['passed'] = self.passed
        return d


def annulus_grid(n: int, r: float, R: float, resolution: int) -> np.ndarray:
    '''
        Points of the uniform grid on [-R, R]^n with r <= |x| <= R.
    '''

    if not (0 < r < R):
        raise InvalidParams('annulus needs 0 < r < R')
    if resolution < 2:
        raise InvalidParams('grid resolution must be at least 2')
    axis = np.linspace(-R, R, resolution)
    axis[np.abs(axis) <= 1e-12 * R] = 0.0
    step = axis[1] - axis[0]
    if r < step * (1 - 1e-9):
        warning(' *** WARNING in clf_smooth: inner radius %g below grid '
                'step %g.', r, step)
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    pts = np.stack([a.reshape(-1) for a in mesh], axis=-1)
    norms = np.linalg.norm(pts, axis=1)
    keep = (norms >= r * (1 - 1e-12)) & (norms <= R * (1 + 1e-12))
    return pts[keep]


def verify_clf_on_region(clf, sys: ControlSystem, U0: ControlSet, r: float,
                         R: float, grid_resolution: int = 41, W=None
                         ) -> VerificationReport:
    '''
        Lists annulus grid points where the decrease margin exceeds -W(x).
        W defaults to the CLF's rate, else to c |x|^2 with c half the
        smallest -margin / |x|^2 observed on the grid.
    '''

    U0 = U0 or sys.control_set
    grid = U0.grid()
    pts = annulus_grid(sys.n, r, R, grid_resolution)
    margins = np.array(parallel_map(
        lambda x: float(_objective(clf, sys, grid, x).min()), pts))
    W = W or clf.W
    rate_constant = None
    if W is None:
        sq = np.sum(pts ** 2, axis=1)
        rate_constant = 0.5 * max(0.0, float(np.min(-margins / sq)))
        rc = rate_constant
        W = lambda x: rc * float(np.dot(x, x))
    rates = np.array([float(W(x)) for x in pts])
    slack = margins + rates
    tol = CHECK_TOL * (1 + np.abs(rates))
    bad = np.flatnonzero(slack > tol)
    violations = [{'x': pts[i].tolist(), 'margin': float(margins[i]),
                   'bound': float(-rates[i])} for i in bad]
    info('clf_smooth: %s on %s, %d/%d grid points violate the decrease '
         'condition', getattr(clf, 'name', 'clf'), sys.name, len(bad),
         len(pts))
    return VerificationReport(
        violations, len(pts),
        {'r': r, 'R': R, 'grid_resolution': grid_resolution},
        rate_constant, float(slack.max()) if slack.size else None)


def check_clf(clf: SmoothCLF, radius: float = 2.0, resolution: int = 21,
              h: float = 1e-6) -> dict:
    '''
        Checks V(0) = 0, positivity, the sandwich and the gradient against
        central differences (relative 1e-4) on a grid of the ball.
    '''

    pts = annulus_grid(clf.n, 1e-3 * radius, radius, resolution)
    vals = np.array([float(clf.V(x)) for x in pts])
    result = {'zero_at_origin': abs(float(clf.V(np.zeros(clf.n)))) <= 1e-12,
              'positive': bool(np.all(vals > 0)), 'sandwich': True,
              'gradient': True}
    if clf.sandwich:
        lower, upper = clf.sandwich
        norms = np.linalg.norm(pts, axis=1)
        result['sandwich'] = bool(np.all(lower(norms) <= vals + 1e-12)
                                  and np.all(vals <= upper(norms) + 1e-12))
    for x in pts:
        g = np.asarray(clf.grad(x), float).reshape(clf.n)
        fd = np.array([(clf.V(x + h * e) - clf.V(x - h * e)) / (2 * h)
                       for e in np.eye(clf.n)])
        if np.linalg.norm(g - fd) > 1e-4 * max(1.0, np.linalg.norm(g)):
            result['gradient'] = False
            break
    result['valid'] = all(result.values())
    return result


def small_control_profile(law: FeedbackLaw, n: int,
                          deltas=(1e-1, 1e-2, 1e-3), points: int = 16,
                          seed: int = 0) -> list:
    '''
        (delta, max |k(x)| over |x| = delta) rows.
    '''

    if n == 1:
        dirs = np.array([[1.0], [-1.0]])
    elif n == 2:
        theta = 2 * np.pi * (np.arange(points) + 0.5) / points
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    else:
        dirs = np.random.default_rng(seed).normal(size=(points, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return [(float(d), float(max(np.linalg.norm(law(d * u)) for u in dirs)))
            for d in deltas]


# ===============
#     CATALOG
# ===============


def _quadratic(n: int) -> SmoothCLF:
    return SmoothCLF('quadratic', n, lambda x: 0.5 * float(np.dot(x, x)),
                     lambda x: np.asarray(x, float).copy(),
                     sandwich=(power(0.5, 2), power(0.5, 2)),
                     small_control=True)


def _double_integrator() -> SmoothCLF:
    P = np.array([[1.5, 0.5], [0.5, 1.0]])
    eig = np.linalg.eigvalsh(P)
    return SmoothCLF('double-integrator', 2,
                     lambda x: float(np.asarray(x) @ P @ np.asarray(x)),
                     lambda x: 2 * P @ np.asarray(x, float),
                     sandwich=(power(eig[0], 2), power(eig[-1], 2)),
                     small_control=True)


def _log1p(n: int) -> SmoothCLF:
    return SmoothCLF('log1p', n, lambda x: float(np.log1p(np.dot(x, x))),
                     lambda x: 2 * np.asarray(x, float)
                     / (1 + np.dot(x, x)), small_control=True)


BUILTIN = ('quadratic', 'double-integrator', 'log1p')


def builtin_clf(name: str, n: int) -> SmoothCLF:
    '''
        Built-in smooth CLF by name for state dimension n.
    '''

    if name == 'quadratic':
        return _quadratic(n)
    if name == 'log1p':
        return _log1p(n)
    if name == 'double-integrator':
        if n != 2:
            raise DimensionMismatch('double-integrator CLF needs n = 2')
        return _double_integrator()
    raise InvalidCLF('unknown CLF %r (built-in: %s)' % (
        name, ', '.join(BUILTIN)))


def clf_from_expression(V: str, n: int, W: str = None,
                        small_control: bool = False) -> SmoothCLF:
    '''
        SmoothCLF from a sympy expression in x1..xn; the gradient is derived
        symbolically.
    '''

    xs = sp.symbols(' '.join('x%d' % (i + 1) for i in range(n)))
    xs = xs if isinstance(xs, tuple) else (xs,)
    try:
        expr = sp.sympify(V, locals={str(s): s for s in xs})
        wexpr = (sp.sympify(W, locals={str(s): s for s in xs})
                 if W else None)
    except (sp.SympifyError, TypeError, SyntaxError) as e:
        raise InvalidCLF('cannot parse CLF expression %r (%s)' % (V, e))
    free = expr.free_symbols | (wexpr.free_symbols if wexpr else set())
    if not free <= set(xs):
        raise InvalidCLF('unknown symbols %s in CLF expression' % sorted(
            map(str, free - set(xs))))
    fv = sp.lambdify(xs, expr, 'numpy')
    fg = sp.lambdify(xs, [sp.diff(expr, s) for s in xs], 'numpy')
    fw = sp.lambdify(xs, wexpr, 'numpy') if wexpr is not None else None
    return SmoothCLF(
        str(expr), n, lambda x: float(fv(*np.asarray(x, float))),
        lambda x: np.asarray(fg(*np.asarray(x, float)), float),
        W=(lambda x: float(fw(*np.asarray(x, float)))) if fw else None,
        small_control=small_control,
        expression={'V': str(expr), 'W': str(wexpr) if wexpr else None})


_JUMPS = (sp.sign, sp.Heaviside, sp.Piecewise, sp.floor, sp.ceiling)


def feedback_from_expression(text: str, n: int, m: int) -> FeedbackLaw:
    '''
        User feedback from sympy expressions in x1..xn, one per control
        component, separated by ';'. Expressions using sign, Heaviside,
        Piecewise, floor or ceiling are classed as discontinuous.

        Raises InvalidParams on parse errors, unknown symbols or a wrong
        number of components.
    '''

    parts = [p for p in str(text).split(';') if p.strip()]
    if len(parts) != m:
        raise InvalidParams('feedback %r has %d component(s), expected %d'
                            % (text, len(parts), m))
    xs = sp.symbols(' '.join('x%d' % (i + 1) for i in range(n)))
    xs = xs if isinstance(xs, tuple) else (xs,)
    names = {str(s): s for s in xs}
    try:
        exprs = [sp.sympify(p, locals=names) for p in parts]
    except (sp.SympifyError, TypeError, SyntaxError) as e:
        raise InvalidParams('cannot parse feedback %r (%s)' % (text, e))
    free = set().union(*(e.free_symbols for e in exprs))
    if not free <= set(xs):
        raise InvalidParams('unknown symbols %s in feedback' % sorted(
            map(str, free - set(xs))))
    fk = sp.lambdify(xs, exprs, 'numpy')
    jumps = any(e.has(j) for e in exprs for j in _JUMPS)

    def k(x):
        return np.asarray(fk(*np.asarray(x, float)), float).reshape(m)

    return FeedbackLaw(k, m, DISCONTINUOUS if jumps else CONTINUOUS, USER,
                       name='; '.join(str(e) for e in exprs))
