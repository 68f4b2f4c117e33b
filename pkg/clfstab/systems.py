'''
    Control systems x' = f(x, u), their compact control sets, and the zoo of
    example systems.

    Dynamics callables take x with shape (..., n) and u with shape (..., m)
    and broadcast over the leading axes, so a whole control grid can be
    evaluated at once. Systems are immutable after construction.

    Classes:
    --------
    ControlSet: Compact neighborhood of the zero control (ball, box or
    finite list) with its argmin sample grid.

    ControlSystem: Dimensions, dynamics, optional control-affine
    decomposition, default control set.

    Trajectory: Sampled solution record.

    Methods:
    --------
    eval_dynamics(sys, x, u): f(x, u) with dimension and finiteness checks.

    affine_parts(sys, x): (f0(x), G(x)) of a control-affine system.

    zoo_build(name, params): Builds a system of the zoo.

    zoo_names(), zoo_describe(name): Catalog listing.

    closed_loop_system(sys, k): x' = f(x, k(x) + v) with new input v.

    linearize(sys): Jacobians (A, B) at the origin.
'''


from logging import info

import numpy as np

from clfstab.model import Model
from clfstab.consts import TIE_RTOL
from clfstab.errors import (DimensionMismatch, NonFiniteOutput, NotAffine,
                            UnknownSystem, InvalidParams)
from clfstab.utils import as_vector
from clfstab import config


GRID_RESOLUTION = config.get_int('SYNTHESIS_GRID_RESOLUTION', 101)
MAX_GRID_POINTS = config.get_int('SYNTHESIS_MAX_GRID_POINTS', 200000)
BLOWUP_BOUND = config.get_float('SIMULATION_BLOWUP_BOUND', 1e6)


# ===================
#     CONTROL SET
# ===================


class ControlSet(Model):
    '''
        Compact neighborhood of 0 in the control space.

        Attributes:
        -----------
        kind: 'ball', 'box' or 'finite'.

        m: Control dimension.

        radius: Ball radius (ball only).

        lo, hi: Box bounds (box only).

        points: Control list (finite only).

        sample_resolution: Points per axis (and per ball shell) of the
        argmin grid.

        Methods:
        --------
        grid(): Sample grid sorted by (|u|, lexicographic order), so that the
        first minimizer of a grid search is the tie-broken one.

        contains(u): True if u lies in the set.
    '''

    def __init__(self, kind: str, m: int, radius: float = None,
                 lo=None, hi=None, points=None,
                 sample_resolution: int = None):
        self.kind = kind
        self.m = int(m)
        self.radius = None if radius is None else float(radius)
        self.lo = None if lo is None else as_vector(lo, self.m, 'lo').tolist()
        self.hi = None if hi is None else as_vector(hi, self.m, 'hi').tolist()
        self.points = None if points is None else [
            as_vector(p, self.m, 'control').tolist() for p in points]
        self.sample_resolution = int(sample_resolution or GRID_RESOLUTION)
        self._grid = None
        self._validate()

    def _validate(self):
        if self.m < 1:
            raise InvalidParams('control dimension must be positive')
        if self.sample_resolution < 2:
            raise InvalidParams('sample_resolution must be at least 2')
        if self.kind == 'ball':
            if self.radius is None or not (0 < self.radius < float('inf')):
                raise InvalidParams('ball radius must be positive and finite')
        elif self.kind == 'box':
            lo, hi = np.array(self.lo), np.array(self.hi)
            if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
                raise InvalidParams('box bounds must be finite')
            if np.any(lo > 0) or np.any(hi < 0) or np.any(lo >= hi):
                raise InvalidParams('box must satisfy lo <= 0 <= hi, lo < hi')
        elif self.kind == 'finite':
            if not self.points:
                raise InvalidParams('finite control set is empty')
            if not any(np.allclose(p, 0) for p in self.points):
                raise InvalidParams('finite control set must contain 0')
        else:
            raise InvalidParams('unknown control set kind %r' % self.kind)

    def contains(self, u, tol: float = 1e-12) -> bool:
        u = as_vector(u, self.m, 'control')
        if self.kind == 'ball':
            return np.linalg.norm(u) <= self.radius * (1 + tol) + tol
        if self.kind == 'box':
            return bool(np.all(u >= np.array(self.lo) - tol)
                        and np.all(u <= np.array(self.hi) + tol))
        return any(np.allclose(u, p, atol=tol) for p in self.points)

    def bound(self) -> float:
        '''
            sup |u| over the set.
        '''

        if self.kind == 'ball':
            return self.radius
        if self.kind == 'box':
            return float(np.linalg.norm(np.maximum(np.abs(self.lo),
                                                   np.abs(self.hi))))
        return float(max(np.linalg.norm(p) for p in self.points))

    def grid(self) -> np.ndarray:
        if self._grid is None:
            self._grid = _sort_controls(self._build_grid())
            self._grid.setflags(write=False)
        return self._grid

    def _axis_resolution(self) -> int:
        res = self.sample_resolution
        if self.m > 1:
            res = min(res, max(2, int(MAX_GRID_POINTS ** (1.0 / self.m))))
        return res

    def _build_grid(self) -> np.ndarray:
        if self.kind == 'finite':
            return np.array(self.points, dtype=float)
        res = self._axis_resolution()
        if self.kind == 'ball':
            lo = np.full(self.m, -self.radius)
            hi = np.full(self.m, self.radius)
        else:
            lo, hi = np.array(self.lo), np.array(self.hi)
        axes = [_axis(lo[j], hi[j], res) for j in range(self.m)]
        mesh = np.meshgrid(*axes, indexing='ij')
        pts = np.stack([a.reshape(-1) for a in mesh], axis=-1)
        if self.kind == 'ball':
            pts = pts[np.linalg.norm(pts, axis=1)
                      <= self.radius * (1 + 1e-12)]
            if self.m == 2:
                theta = 2 * np.pi * np.arange(res) / res
                shell = self.radius * np.stack(
                    [np.cos(theta), np.sin(theta)], axis=-1)
                pts = np.vstack([pts, shell])
        return pts

    @classmethod
    def from_dict(cls, d: dict):
        return cls(d['kind'], d['m'], radius=d.get('radius'), lo=d.get('lo'),
                   hi=d.get('hi'), points=d.get('points'),
                   sample_resolution=d.get('sample_resolution'))


def _axis(lo: float, hi: float, res: int) -> np.ndarray:
    axis = np.linspace(lo, hi, res)
    span = hi - lo
    axis[np.abs(axis) <= 1e-12 * span] = 0.0
    if not np.any(axis == 0.0):
        axis = np.sort(np.append(axis, 0.0))
    return axis


def _sort_controls(pts: np.ndarray) -> np.ndarray:
    pts = np.unique(pts, axis=0)
    norms = np.round(np.linalg.norm(pts, axis=1), 12)
    keys = tuple(pts[:, j] for j in reversed(range(pts.shape[1]))) + (norms,)
    return pts[np.lexsort(keys)]


def grid_argmin(values: np.ndarray) -> int:
    '''
        Index of the first grid minimizer within a relative tolerance. On a
        grid from ControlSet.grid() this breaks ties by smallest |u|, then
        lexicographic order.
    '''

    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFiniteOutput('non-finite objective on the control grid')
    best = values.min()
    tol = TIE_RTOL * float(np.abs(values).max())
    return int(np.flatnonzero(values <= best + tol)[0])


def grid_argmin_rows(values: np.ndarray) -> np.ndarray:
    '''
        grid_argmin of every row of a (N, G) objective.
    '''

    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise NonFiniteOutput('non-finite objective on the control grid')
    best = values.min(axis=1)
    tol = TIE_RTOL * np.abs(values).max(axis=1)
    return np.argmax(values <= (best + tol)[:, None], axis=1)


def ball(radius: float, m: int = 1, resolution: int = None) -> ControlSet:
    return ControlSet('ball', m, radius=radius, sample_resolution=resolution)


def box(lo, hi, m: int = None, resolution: int = None) -> ControlSet:
    lo = np.atleast_1d(np.asarray(lo, float))
    hi = np.atleast_1d(np.asarray(hi, float))
    m = m or max(lo.size, hi.size)
    if lo.size == 1:
        lo = np.full(m, lo[0])
    if hi.size == 1:
        hi = np.full(m, hi[0])
    return ControlSet('box', m, lo=lo, hi=hi, sample_resolution=resolution)


def finite(points) -> ControlSet:
    points = [np.atleast_1d(np.asarray(p, float)) for p in points]
    if not points:
        raise InvalidParams('finite control set is empty')
    return ControlSet('finite', points[0].size, points=points)


def parse_control_set(text: str, m: int) -> ControlSet:
    '''
        ball:R[:res] | box:lo:hi[:res] | finite:u1;u2;...
    '''

    try:
        kind, _, rest = text.partition(':')
        args = rest.split(':') if rest else []
        if kind == 'ball':
            return ball(float(args[0]), m,
                        int(args[1]) if len(args) > 1 else None)
        if kind == 'box':
            return box(float(args[0]), float(args[1]), m,
                       int(args[2]) if len(args) > 2 else None)
        if kind == 'finite':
            return finite([[float(v) for v in p.split(',')]
                           for p in rest.split(';')])
    except (IndexError, ValueError) as e:
        raise InvalidParams('malformed control set %r (%s)' % (text, e))
    raise InvalidParams('unknown control set kind in %r' % text)


# ======================
#     CONTROL SYSTEM
# ======================


class ControlSystem(Model):
    '''
        Control system x' = f(x, u).

        Attributes:
        -----------
        name: Identifier.

        n, m: State and control dimensions.

        f: Dynamics (x, u) -> x', broadcasting over leading axes.

        drift, input_matrix: f0(x) and G(x) of the control-affine form
        f0(x) + G(x) u, or None.

        control_set: Default compact control set U0.

        lipschitz_hint: Optional local Lipschitz estimate.

        params: Parameters the system was built with.

        known_feedback: Optional stabilizing feedback x -> u from the
        literature.

        description: Human readable formula.
    '''

    _transient = ('f', 'drift', 'input_matrix', 'known_feedback')

    def __init__(self, name: str, n: int, m: int, f, drift=None,
                 input_matrix=None, control_set: ControlSet = None,
                 lipschitz_hint: float = None, params: dict = None,
                 known_feedback=None, description: str = '',
                 reconstruction: bool = False):
        if n < 1 or m < 1:
            raise InvalidParams('dimensions must be positive')
        if (drift is None) != (input_matrix is None):
            raise InvalidParams('affine form needs both drift and input '
                                'matrix')
        if lipschitz_hint is not None and lipschitz_hint <= 0:
            raise InvalidParams('lipschitz_hint must be positive')
        self.name = name
        self.n = int(n)
        self.m = int(m)
        self.f = f
        self.drift = drift
        self.input_matrix = input_matrix
        self.affine = drift is not None
        self.control_set = control_set or box(-1.0, 1.0, m)
        if self.control_set.m != self.m:
            raise DimensionMismatch('control set dimension %d, expected %d'
                                    % (self.control_set.m, self.m))
        self.lipschitz_hint = lipschitz_hint
        self.params = dict(params or {})
        self.known_feedback = known_feedback
        self.description = description
        self.reconstruction = reconstruction

    def eval_batch(self, x, u) -> np.ndarray:
        '''
            f over broadcast arrays x (..., n) and u (..., m).
        '''

        x = np.asarray(x, float)
        u = np.asarray(u, float)
        shape = np.broadcast_shapes(x.shape[:-1], u.shape[:-1]) + (self.n,)
        try:
            out = np.asarray(self.f(x, u), float)
            if out.shape == shape:
                return out
        except (ValueError, TypeError, IndexError):
            pass
        xb = np.broadcast_to(x, shape[:-1] + (self.n,)).reshape(-1, self.n)
        ub = np.broadcast_to(u, shape[:-1] + (self.m,)).reshape(-1, self.m)
        out = np.array([np.asarray(self.f(a, b), float).reshape(self.n)
                        for a, b in zip(xb, ub)])
        return out.reshape(shape)

    def describe(self) -> dict:
        d = self.as_dict()
        d['control_set'] = self.control_set.as_dict()
        return d


class Trajectory(Model):
    '''
        Sampled solution x(t, x0, u).

        Attributes:
        -----------
        id: Trajectory identifier (bundle order).

        times: Strictly increasing times.

        states: States, one row per time.

        controls: Controls applied, one row per hold interval (may be empty
        for autonomous runs).

        inputs: Exogenous input values at times (optional).

        escaped: True if |x| exceeded the blow-up bound or became non-finite.

        escape_time: Time of escape, if any.
    '''

    def __init__(self, id, times, states, controls=None, inputs=None,
                 escaped: bool = False, escape_time: float = None,
                 x0=None):
        self.id = id
        self.times = np.asarray(times, float)
        self.states = np.atleast_2d(np.asarray(states, float))
        if self.states.shape[0] != self.times.shape[0]:
            self.states = self.states.reshape(self.times.shape[0], -1)
        self.controls = (np.zeros((0, 0)) if controls is None
                         else np.asarray(controls, float))
        self.inputs = None if inputs is None else np.asarray(inputs, float)
        self.escaped = bool(escaped)
        self.escape_time = escape_time
        self.x0 = (self.states[0] if x0 is None
                   else np.atleast_1d(np.asarray(x0, float)))
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParams('trajectory times must be strictly '
                                'increasing')

    @property
    def x0_norm(self) -> float:
        return float(np.linalg.norm(self.x0))

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @classmethod
    def from_dict(cls, d: dict):
        return cls(d['id'], d['times'], d['states'], d.get('controls'),
                   d.get('inputs'), d.get('escaped', False),
                   d.get('escape_time'), d.get('x0'))


# ==================
#     OPERATIONS
# ==================


def eval_dynamics(sys: ControlSystem, x, u) -> np.ndarray:
    '''
        Returns f(x, u).

        Raises DimensionMismatch on wrong dimensions and NonFiniteOutput if
        the dynamics return NaN or infinity.
    '''

    x = as_vector(x, sys.n, 'state')
    u = as_vector(u, sys.m, 'control')
    out = np.asarray(sys.f(x, u), float).reshape(-1)
    if out.shape[0] != sys.n:
        raise DimensionMismatch('dynamics returned dimension %d, expected %d'
                                % (out.shape[0], sys.n))
    if not np.all(np.isfinite(out)):
        raise NonFiniteOutput('%s: non-finite f at x=%s, u=%s' % (
            sys.name, x.tolist(), u.tolist()), x=x, u=u)
    return out


def affine_parts(sys: ControlSystem, x):
    '''
        Returns (f0(x), G(x)) with G of shape (n, m).

        Raises NotAffine if sys has no control-affine decomposition.
    '''

    if not sys.affine:
        raise NotAffine('%s has no control-affine decomposition' % sys.name)
    x = as_vector(x, sys.n, 'state')
    drift = np.asarray(sys.drift(x), float).reshape(sys.n)
    G = np.asarray(sys.input_matrix(x), float).reshape(sys.n, sys.m)
    return drift, G


def affine_defect(sys: ControlSystem, samples: int = 100, radius: float = 2.0,
                  seed: int = 0) -> float:
    '''
        Largest relative gap |f - f0 - G u| / (1 + |f|) at random (x, u).
    '''

    rng = np.random.default_rng(seed)
    worst = 0.0
    ubound = sys.control_set.bound()
    for _ in range(samples):
        x = rng.uniform(-radius, radius, sys.n)
        u = rng.uniform(-ubound, ubound, sys.m)
        fx = eval_dynamics(sys, x, u)
        f0, G = affine_parts(sys, x)
        worst = max(worst, np.linalg.norm(fx - f0 - G @ u)
                    / (1 + np.linalg.norm(fx)))
    return float(worst)


def closed_loop_system(sys: ControlSystem, k, name: str = None
                       ) -> ControlSystem:
    '''
        Returns x' = f(x, k(x) + v), v being the new input.
    '''

    def f(x, v):
        x = np.asarray(x, float)
        v = np.asarray(v, float)
        if x.ndim == 1 and v.ndim == 1:
            return sys.f(x, as_vector(k(x), sys.m, 'control') + v)
        shape = np.broadcast_shapes(x.shape[:-1], v.shape[:-1])
        xb = np.broadcast_to(x, shape + (sys.n,)).reshape(-1, sys.n)
        vb = np.broadcast_to(v, shape + (sys.m,)).reshape(-1, sys.m)
        out = np.array([sys.f(a, as_vector(k(a), sys.m, 'control') + b)
                        for a, b in zip(xb, vb)])
        return out.reshape(shape + (sys.n,))

    return ControlSystem(name or sys.name + '-closed-loop', sys.n, sys.m, f,
                         control_set=sys.control_set, params=sys.params,
                         description='f(x, k(x) + v) for ' + sys.name)


def linearize(sys: ControlSystem, h: float = 1e-6):
    '''
        Central-difference Jacobians (A, B) of f at the origin.
    '''

    A = np.zeros((sys.n, sys.n))
    B = np.zeros((sys.n, sys.m))
    x0, u0 = np.zeros(sys.n), np.zeros(sys.m)
    for j in range(sys.n):
        e = np.zeros(sys.n)
        e[j] = h
        A[:, j] = (eval_dynamics(sys, x0 + e, u0)
                   - eval_dynamics(sys, x0 - e, u0)) / (2 * h)
    for j in range(sys.m):
        e = np.zeros(sys.m)
        e[j] = h
        B[:, j] = (eval_dynamics(sys, x0, u0 + e)
                   - eval_dynamics(sys, x0, u0 - e)) / (2 * h)
    return A, B


# ===========
#     ZOO
# ===========


def _field(*components):
    return np.stack(np.broadcast_arrays(*components), axis=-1)


def _cols(x):
    x = np.asarray(x, float)
    return [x[..., i] for i in range(x.shape[-1])]


def _affine(name, n, m, drift, gmat, **kwargs):
    def f(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        return drift(x) + np.einsum('...ij,...j->...i', gmat(x), u)
    return ControlSystem(name, n, m, f, drift=drift, input_matrix=gmat,
                         **kwargs)


def _cubic_1d(p):
    def f(x, u):
        return np.asarray(x, float) + np.asarray(u, float) ** 3
    return ControlSystem(
        'cubic-1d', 1, 1, f, known_feedback=lambda x: -np.cbrt(2 * x),
        description="x' = x + u^3")


def _scalar_two_regions(p):
    def f(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        return x * ((u - 1) ** 2 - (x - 1)) * ((u + 1) ** 2 - (2 - x))
    return ControlSystem(
        'scalar-two-regions', 1, 1, f, control_set=box(-2.0, 2.0, 1),
        reconstruction=True,
        description="x' = x [(u-1)^2 - (x-1)] [(u+1)^2 - (2-x)] "
                    "(reconstructed from its sign regions)")


def _shopping_cart(p):
    def gmat(x):
        x1, x2, th = _cols(x)
        zero, one = np.zeros_like(th), np.ones_like(th)
        return np.stack([_field(np.cos(th), zero), _field(np.sin(th), zero),
                         _field(zero, one)], axis=-2)
    return _affine('shopping-cart', 3, 2, np.zeros_like, gmat,
                   control_set=box(-1.0, 1.0, 2),
                   description="x1' = u1 cos(th), x2' = u1 sin(th), th' = u2")


def _nonholonomic_integrator(p):
    def gmat(x):
        x1, x2, x3 = _cols(x)
        zero, one = np.zeros_like(x1), np.ones_like(x1)
        return np.stack([_field(one, zero), _field(zero, one),
                         _field(-x2, x1)], axis=-2)
    return _affine('nonholonomic-integrator', 3, 2, np.zeros_like, gmat,
                   control_set=box(-1.0, 1.0, 2),
                   description="x1' = u1, x2' = u2, x3' = x1 u2 - x2 u1")


def _artstein_circles(p):
    def gmat(x):
        x1, x2 = _cols(x)
        return _field(x1 ** 2 - x2 ** 2, 2 * x1 * x2)[..., None]
    return _affine('artstein-circles', 2, 1, np.zeros_like, gmat,
                   description="x' = u (x1^2 - x2^2, 2 x1 x2)")


def _rigid_body_feedback(x):
    x1, x2, x3 = np.asarray(x, float)
    return np.array([-x1 - x2 - x2 * x3,
                     -x3 + x1 ** 2 + 2 * x1 * x2 * x3])


def _rigid_body_reduced(p):
    def drift(x):
        x1, x2, x3 = _cols(x)
        return _field(x2 * x3, 0 * x1, 0 * x1)

    def gmat(x):
        x1 = _cols(x)[0]
        zero, one = np.zeros_like(x1), np.ones_like(x1)
        return np.stack([_field(zero, zero), _field(one, zero),
                         _field(zero, one)], axis=-2)
    return _affine('rigid-body-reduced', 3, 2, drift, gmat,
                   control_set=box(-5.0, 5.0, 2),
                   known_feedback=_rigid_body_feedback,
                   description="x1' = x2 x3, x2' = u1, x3' = u2")


def _scalar_affine(name, drift, gain, description, control_set=None,
                   **kwargs):
    def d(x):
        return drift(np.asarray(x, float))

    def g(x):
        return gain(np.asarray(x, float))[..., None]
    return _affine(name, 1, 1, d, g, control_set=control_set,
                   description=description, **kwargs)


def _gas_not_iss(p):
    return _scalar_affine('gas-not-iss', lambda x: -x,
                          lambda x: x ** 2 + 1, "x' = -x + (x^2 + 1) u")


def _unstable_1d(p):
    return _scalar_affine('unstable-1d', lambda x: x,
                          lambda x: x ** 2 + 1, "x' = x + (x^2 + 1) u")


def _iss_redesign(p):
    return _scalar_affine('iss-redesign', lambda x: -2 * x - x ** 3,
                          lambda x: x ** 2 + 1,
                          "x' = -2x - x^3 + (x^2 + 1) u")


def _arctan_iiss(p):
    return _scalar_affine('arctan-iiss', lambda x: -np.arctan(x),
                          lambda x: np.ones_like(x), "x' = -atan(x) + u")


def _uuu(p):
    def f(x, u):
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        u1, u2, u3 = _cols(u)
        return np.broadcast_to(_field(u2 * u3, u1 * u3, u1 * u2),
                               np.broadcast_shapes(x.shape, u.shape[:-1]
                                                   + (3,))).copy()
    return ControlSystem('uuu', 3, 3, f, control_set=box(-1.0, 1.0, 3),
                         description="x1' = u2 u3, x2' = u1 u3, x3' = u1 u2")


def _linear(p):
    A = np.atleast_2d(np.asarray(p.get('A', [[0.0, 1.0], [0.0, 0.0]]),
                                 float))
    B = np.asarray(p.get('B', [[0.0], [1.0]]), float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n, m = B.shape
    if A.shape != (n, n):
        raise InvalidParams('A must be %dx%d' % (n, n))
    return _affine('linear', n, m, lambda x: np.asarray(x, float) @ A.T,
                   lambda x: np.broadcast_to(
                       B, np.asarray(x).shape[:-1] + B.shape),
                   lipschitz_hint=float(np.linalg.norm(A, 2)) or None,
                   params={'A': A.tolist(), 'B': B.tolist()},
                   description="x' = A x + B u")


def _linear_1d(p):
    a = float(p.get('a', 1.0))
    b = float(p.get('b', 1.0))
    sys = _linear({'A': [[a]], 'B': [[b]]})
    sys.name = 'linear-1d'
    sys.params = {'a': a, 'b': b}
    sys.description = "x' = a x + b u"
    return sys


def _single_integrator(p):
    n = int(p.get('n', 1))
    if n < 1:
        raise InvalidParams('n must be positive')
    sys = _linear({'A': np.zeros((n, n)).tolist(),
                   'B': np.eye(n).tolist()})
    sys.name = 'single-integrator'
    sys.lipschitz_hint = None
    sys.params = {'n': n}
    sys.description = "x' = u"
    return sys


def _double_integrator(p):
    sys = _linear({})
    sys.name = 'double-integrator'
    sys.params = {}
    sys.control_set = box(-10.0, 10.0, 1)
    sys.description = "x1' = x2, x2' = u"
    return sys


def _bilinear_diag(p):
    def gmat(x):
        return np.asarray(x, float)[..., None]
    return _affine('bilinear-diag', 2, 1, np.zeros_like, gmat,
                   description="x1' = x1 u, x2' = x2 u")


def _rigid_body_x1(p):
    def f(x, v):
        x = np.asarray(x, float)[..., 0]
        v1, v2 = _cols(v)
        return ((v1 - x) * (v2 + x ** 2))[..., None]
    return ControlSystem('rigid-body-x1', 1, 2, f,
                         control_set=box(-1.0, 1.0, 2),
                         description="x1' = (z2 - x1)(z3 + x1^2)")


_ZOO = {
    'cubic-1d': (_cubic_1d, {}),
    'scalar-two-regions': (_scalar_two_regions, {}),
    'shopping-cart': (_shopping_cart, {}),
    'nonholonomic-integrator': (_nonholonomic_integrator, {}),
    'artstein-circles': (_artstein_circles, {}),
    'rigid-body-reduced': (_rigid_body_reduced, {}),
    'gas-not-iss': (_gas_not_iss, {}),
    'unstable-1d': (_unstable_1d, {}),
    'iss-redesign': (_iss_redesign, {}),
    'arctan-iiss': (_arctan_iiss, {}),
    'uuu': (_uuu, {}),
    'linear': (_linear, {'A': [[0.0, 1.0], [0.0, 0.0]], 'B': [[0.0], [1.0]]}),
    'linear-1d': (_linear_1d, {'a': 1.0, 'b': 1.0}),
    'single-integrator': (_single_integrator, {'n': 1}),
    'double-integrator': (_double_integrator, {}),
    'bilinear-diag': (_bilinear_diag, {}),
    'rigid-body-x1': (_rigid_body_x1, {}),
}


def zoo_names() -> list:
    return sorted(_ZOO)


def zoo_build(name: str, params: dict = None) -> ControlSystem:
    '''
        Builds the zoo system name with params.

        Raises UnknownSystem for names not in the catalog and InvalidParams
        for parameters the system does not take or cannot use.
    '''

    if name not in _ZOO:
        raise UnknownSystem('unknown system %r (known: %s)' % (
            name, ', '.join(zoo_names())), name=name)
    builder, defaults = _ZOO[name]
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise InvalidParams('%s takes no parameter(s) %s' % (
            name, ', '.join(sorted(unknown))))
    merged = dict(defaults)
    merged.update(params)
    try:
        sys = builder(merged)
    except InvalidParams:
        raise
    except (TypeError, ValueError) as e:
        raise InvalidParams('%s: invalid parameters (%s)' % (name, e))
    eq = eval_dynamics(sys, np.zeros(sys.n), np.zeros(sys.m))
    if np.linalg.norm(eq) > 1e-12:
        raise InvalidParams('%s: f(0, 0) != 0' % name)
    info('zoo: built %s (n=%d, m=%d, affine=%s)', name, sys.n, sys.m,
         sys.affine)
    return sys


def zoo_describe(name: str, params: dict = None) -> dict:
    return zoo_build(name, params).describe()
