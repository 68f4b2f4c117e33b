'''
    Continuous (nonsmooth) control-Lyapunov functions, proximal subgradients,
    inf-convolution (Moreau envelope) regularization, and the proximal
    feedback k_alpha.

    The envelope V_alpha(x) = inf_y [V(y) + |x - y|^2 / (2 alpha^2)] is
    computed by a batched compass search restricted to the ball
    |y - x| <= sqrt(2) alpha sqrt(V(x)), started from x, from the origin and
    from seeded random points of the ball. When the CLF has a gradient, a few
    fixed-point steps y <- x - alpha^2 grad V(y) move the starts first. The
    searches of many states run together in inf_convolve_batch.

    Classes:
    --------
    ContinuousCLF: V, decrease rate W, sandwich, optional control bound
    sigma and optional almost-everywhere gradient.

    MoreauEnvelope: Base CLF, scale alpha and a bounded minimizer cache.

    Methods:
    --------
    inf_convolve(env, x): (V_alpha(x), y_alpha(x)).

    inf_convolve_batch(env, X): The same for every row of X.

    proximal_aim(env, x): zeta_alpha(x) = (x - y_alpha(x)) / alpha^2.

    proximal_feedback(env, sys, U0): argmin over the U0 grid of
    zeta_alpha(x) . f(x, u).

    proximal_subgradient_test(V, x, zeta, mu, radius, samples): Checks the
    proximal subgradient inequality on samples of a ball.

    artstein_clf(): The continuous CLF of the Artstein circles.

    envelope_decrease_check(env, sys, U0, r, R, grid): Decrease of the
    envelope on an annulus.
'''


from threading import Lock
from logging import info

import numpy as np
import pandas as pd

from clfstab.model import Model
from clfstab.consts import CHECK_TOL, DISCONTINUOUS, PROXIMAL
from clfstab.errors import NonConvergence, InvalidParams, DimensionMismatch
from clfstab.systems import (ControlSystem, ControlSet, grid_argmin,
                             grid_argmin_rows)
from clfstab.comparison import KFunction, power
from clfstab.clf_smooth import (FeedbackLaw, VerificationReport,
                                annulus_grid)
from clfstab.utils import as_vector, parallel_map
from clfstab import config


TOLERANCE = config.get_float('ENVELOPE_TOLERANCE', 1e-8)
MAX_ITER = config.get_int('ENVELOPE_MAX_ITER', 20000)
RESTARTS = config.get_int('ENVELOPE_RESTARTS', 3)
SEED = config.get_int('ENVELOPE_SEED', 20240611)
CACHE_SIZE = config.get_int('ENVELOPE_CACHE_SIZE', 100000)
WARM_STEPS = config.get_int('ENVELOPE_WARM_STEPS', 6)
WARM_STEP = config.get_float('ENVELOPE_WARM_STEP', 1e-6)
DECREASE_FRACTION = config.get_float('SYNTHESIS_DECREASE_FRACTION', 0.5)


class ContinuousCLF(Model):
    '''
        Continuous control-Lyapunov function.

        Attributes:
        -----------
        name: Identifier.

        n: State dimension.

        V: Value function; called on a single state or a batch (N, n).

        W: Positive-definite decrease rate.

        sandwich: (lower, upper) KFunctions.

        sigma: Optional KFunction bounding |u| in the decrease condition.

        grad: Optional gradient, valid almost everywhere.

        batch_grad: Whether grad also maps a batch (N, n) to (N, n).
    '''

    _transient = ('V', 'W', 'grad')

    def __init__(self, name: str, n: int, V, W=None,
                 sandwich: tuple = None, sigma: KFunction = None, grad=None,
                 batch_grad: bool = False):
        self.name = name
        self.n = int(n)
        self.V = V
        self.W = W
        self.sandwich = sandwich
        self.sigma = sigma
        self.grad = grad
        self.batch_grad = batch_grad
        self.small_control = False

    def values(self, Y: np.ndarray) -> np.ndarray:
        '''
            V over a batch of states (N, n).
        '''

        Y = np.atleast_2d(np.asarray(Y, float))
        try:
            out = np.asarray(self.V(Y), float)
            if out.shape == (Y.shape[0],):
                return out
        except (ValueError, TypeError, IndexError):
            pass
        return np.array([float(self.V(y)) for y in Y])

    def gradients(self, Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, float))
        if self.batch_grad:
            return np.asarray(self.grad(Y), float)
        return np.array([np.asarray(self.grad(y), float).reshape(self.n)
                         for y in Y])

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        d = {'name': self.name, 'n': self.n,
             'has_rate': self.W is not None}
        if self.sandwich:
            d['sandwich'] = [k.as_dict() for k in self.sandwich]
        if self.sigma is not None:
            d['sigma'] = self.sigma.as_dict()
        return d


def _artstein_value(x):
    x = np.asarray(x, float)
    r = np.linalg.norm(x, axis=-1)
    den = r + np.abs(x[..., 0])
    out = np.divide(r ** 2, den, out=np.zeros_like(r), where=den > 0)
    return float(out) if out.ndim == 0 else out


def _artstein_grad(x):
    x = np.asarray(x, float)
    r = np.linalg.norm(x, axis=-1, keepdims=True)
    den = r + np.abs(x[..., :1])
    e1 = np.zeros_like(x)
    e1[..., 0] = np.sign(x[..., 0])
    safe_r = np.where(r > 0, r, 1.0)
    safe_den = np.where(den > 0, den, 1.0)
    g = (2 * x * den - r ** 2 * (x / safe_r + e1)) / safe_den ** 2
    return np.where(r > 0, g, 0.0)


def artstein_clf() -> ContinuousCLF:
    '''
        V(x) = |x|^2 / (|x| + |x1|), V(0) = 0, with W(x) = |x|^2 / 2 and
        sandwich |x| / 2 <= V(x) <= |x|. The gradient uses sign(0) = 0 on
        the line x1 = 0, where V is not differentiable.
    '''

    return ContinuousCLF(
        'artstein', 2, _artstein_value,
        W=lambda x: 0.5 * float(np.dot(x, x)),
        sandwich=(power(0.5, 1.0), power(1.0, 1.0)), grad=_artstein_grad,
        batch_grad=True)


def _unit(x):
    x = np.asarray(x, float)
    return x / np.maximum(np.linalg.norm(x, axis=-1, keepdims=True), 1e-300)


def abs_clf(n: int = 1) -> ContinuousCLF:
    return ContinuousCLF(
        'abs', n, lambda x: np.linalg.norm(np.asarray(x, float), axis=-1),
        W=lambda x: float(np.linalg.norm(x)),
        sandwich=(power(1.0, 1.0), power(1.0, 1.0)),
        grad=_unit, batch_grad=True)


def quadratic_clf(n: int) -> ContinuousCLF:
    return ContinuousCLF(
        'quadratic', n,
        lambda x: 0.5 * np.sum(np.asarray(x, float) ** 2, axis=-1),
        W=lambda x: 0.5 * float(np.dot(x, x)),
        sandwich=(power(0.5, 2.0), power(0.5, 2.0)),
        grad=lambda x: np.asarray(x, float).copy(), batch_grad=True)


def from_smooth(clf) -> ContinuousCLF:
    '''
        Views a SmoothCLF as a ContinuousCLF.
    '''

    return ContinuousCLF(clf.name, clf.n, clf.V, W=clf.W,
                         sandwich=clf.sandwich, grad=clf.grad)


BUILTIN = {'artstein': lambda n: artstein_clf(), 'abs': abs_clf,
           'quadratic': quadratic_clf}


# ======================
#     MOREAU ENVELOPE
# ======================


class MoreauEnvelope(Model):
    '''
        Inf-convolution of a continuous CLF with |.|^2 / (2 alpha^2).

        Attributes:
        -----------
        base: ContinuousCLF.

        alpha: Regularization scale.

        cache_enabled: Whether minimizers are cached (reads are concurrent,
        writes serialized).

        cache_size: Entries kept before the cache is emptied.
    '''

    _transient = ('cache',)

    def __init__(self, base: ContinuousCLF, alpha: float,
                 cache_enabled: bool = True, cache_size: int = None):
        if not alpha > 0:
            raise InvalidParams('alpha must be positive')
        cache_size = CACHE_SIZE if cache_size is None else int(cache_size)
        if cache_size < 1:
            raise InvalidParams('cache_size must be positive')
        self.base = base
        self.alpha = float(alpha)
        self.cache_enabled = cache_enabled
        self.cache_size = cache_size
        self.cache = {}
        self._lock = Lock()

    @property
    def n(self) -> int:
        return self.base.n

    def value(self, x) -> float:
        return inf_convolve(self, x)[0]

    def clear(self):
        with self._lock:
            self.cache = {}

    def _store(self, entries: dict):
        with self._lock:
            if len(self.cache) + len(entries) > self.cache_size:
                info('nonsmooth_clf: envelope cache full (%d entries), '
                     'emptied', len(self.cache))
                self.cache = {}
            self.cache.update(list(entries.items())[:self.cache_size])


def _search_starts(x: np.ndarray, rho: float, rng) -> np.ndarray:
    n = x.size
    starts = [x]
    nx = np.linalg.norm(x)
    origin = np.zeros(n) if nx <= rho else x * (1 - rho / nx)
    starts.append(origin)
    for _ in range(RESTARTS):
        d = rng.normal(size=n)
        d /= max(np.linalg.norm(d), 1e-300)
        starts.append(x + rho * rng.uniform() ** (1.0 / n) * d)
    return np.array(starts)


def _project(Y: np.ndarray, centers: np.ndarray, rhos: np.ndarray):
    off = Y - centers
    dist = np.linalg.norm(off, axis=-1, keepdims=True)
    r = rhos[..., None]
    return np.where(dist > r, centers + off * (r / np.maximum(dist, 1e-300)),
                    Y)


def _objective(base: ContinuousCLF, a2: float):
    def phi(Y, centers):
        return base.values(Y) + np.sum((Y - centers) ** 2, axis=-1) / a2
    return phi


def _warm_start(base: ContinuousCLF, phi, starts, centers, rhos, alpha2):
    '''
        Fixed-point steps y <- x - alpha^2 grad V(y) from every start. A
        start is replaced only where the objective drops; those starts begin
        the compass search with a short step.
    '''

    Y = starts
    with np.errstate(all='ignore'):
        for _ in range(WARM_STEPS):
            Y = _project(centers - alpha2 * base.gradients(Y), centers,
                         rhos)
        vals = phi(Y, centers)
    before = phi(starts, centers)
    better = np.isfinite(vals) & np.all(np.isfinite(Y), axis=1) \
        & (vals < before)
    Y = np.where(better[:, None], Y, starts)
    steps = np.where(better, WARM_STEP * rhos, rhos / 2)
    return Y, steps


def _compass_search(phi, starts: np.ndarray, centers: np.ndarray,
                    rhos: np.ndarray, steps: np.ndarray):
    '''
        Compass search of every start against its own center, each start
        restricted to the ball of radius rhos around its center. All starts
        advance together.
    '''

    k, n = starts.shape
    D = np.vstack([np.eye(n), -np.eye(n)])
    Y = starts.copy()
    vals = phi(Y, centers)
    steps = steps.copy()
    smin = np.maximum(1e-300, 1e-10 * rhos)
    it = 0
    while True:
        idx = np.flatnonzero(steps > smin)
        if not idx.size:
            break
        it += 1
        if it > MAX_ITER:
            x = centers[idx[0]]
            raise NonConvergence('inf-convolution did not converge at x = %s'
                                 % x.tolist(), x=x)
        c = centers[idx, None, :]
        cand = _project(Y[idx, None, :] + steps[idx, None, None] * D[None],
                        c, rhos[idx, None])
        cv = phi(cand.reshape(-1, n),
                 np.repeat(centers[idx], 2 * n, axis=0)
                 ).reshape(idx.size, 2 * n)
        j = np.argmin(cv, axis=1)
        best = cv[np.arange(idx.size), j]
        better = best < vals[idx] - TOLERANCE * 1e-4 * (1 + np.abs(vals[idx]))
        win, lose = idx[better], idx[~better]
        Y[win] = cand[better, j[better]]
        vals[win] = best[better]
        steps[win] = np.minimum(2 * steps[win], rhos[win])
        steps[lose] /= 2
    return Y, vals


def inf_convolve_batch(env: MoreauEnvelope, X, use_cache: bool = None):
    '''
        (V_alpha(x), y_alpha(x)) for every row of X, the searches of all rows
        running together. Same values as inf_convolve row by row.

        Raises NonConvergence when the search budget is exhausted.
    '''

    X = np.atleast_2d(np.asarray(X, float))
    if X.shape[1] != env.n:
        raise DimensionMismatch('state has dimension %d, expected %d'
                                % (X.shape[1], env.n), expected=env.n,
                                got=int(X.shape[1]))
    use_cache = env.cache_enabled if use_cache is None else use_cache
    N, n = X.shape
    values = np.zeros(N)
    Y = np.zeros((N, n))
    keys = [x.tobytes() for x in X]
    todo = []
    for i, key in enumerate(keys):
        hit = env.cache.get(key) if use_cache else None
        if hit is not None:
            values[i], Y[i] = hit[0], hit[1]
        elif np.any(X[i]):
            todo.append(i)

    if todo:
        todo = np.array(todo)
        vx = env.base.values(X[todo])
        rho = np.sqrt(2.0 * np.maximum(vx, 0.0)) * env.alpha
        values[todo], Y[todo] = vx, X[todo]
        search = todo[rho > 0]
        rho = rho[rho > 0]
        if search.size:
            blocks = [_search_starts(
                X[i], r, np.random.default_rng(
                    [SEED] + np.frombuffer(keys[i], dtype=np.uint32).tolist()))
                for i, r in zip(search, rho)]
            per = blocks[0].shape[0]
            starts = np.vstack(blocks)
            centers = np.repeat(X[search], per, axis=0)
            rhos = np.repeat(rho, per)
            phi = _objective(env.base, 2 * env.alpha ** 2)
            steps = rhos / 2
            if env.base.grad is not None:
                try:
                    starts, steps = _warm_start(env.base, phi, starts,
                                                centers, rhos,
                                                env.alpha ** 2)
                except (ValueError, TypeError, ZeroDivisionError):
                    pass
            Ys, vals = _compass_search(phi, starts, centers, rhos, steps)
            for b, i in enumerate(search):
                vb = vals[b * per:(b + 1) * per]
                yb = Ys[b * per:(b + 1) * per]
                best = vb.min()
                near = np.flatnonzero(vb <= best + 1e-12 * (1 + abs(best)))
                pick = near[np.argmin(np.linalg.norm(yb[near] - X[i],
                                                     axis=1))]
                if vb[pick] < values[i]:
                    values[i], Y[i] = vb[pick], yb[pick]

    if use_cache and len(todo):
        env._store({keys[i]: (values[i], Y[i].copy()) for i in todo})
    return values, Y


def inf_convolve(env: MoreauEnvelope, x):
    '''
        Returns (V_alpha(x), y_alpha(x)). The value never exceeds V(x) and
        ties between local minimizers go to the smallest |y - x|.

        Raises NonConvergence when the search budget is exhausted.
    '''

    x = as_vector(x, env.n, 'state')
    values, Y = inf_convolve_batch(env, x[None, :])
    return float(values[0]), Y[0]


def proximal_aim(env: MoreauEnvelope, x) -> np.ndarray:
    '''
        zeta_alpha(x) = (x - y_alpha(x)) / alpha^2.
    '''

    x = as_vector(x, env.n, 'state')
    _, y = inf_convolve(env, x)
    return (x - y) / env.alpha ** 2


def proximal_aims(env: MoreauEnvelope, X) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    _, Y = inf_convolve_batch(env, X)
    return (X - Y) / env.alpha ** 2


def proximal_feedback(env: MoreauEnvelope, sys: ControlSystem,
                      U0: ControlSet = None) -> FeedbackLaw:
    '''
        k_alpha(x) = argmin over the U0 grid of zeta_alpha(x) . f(x, u), with
        the grid tie-breaking; k_alpha(0) = 0.
    '''

    U0 = U0 or sys.control_set
    grid = U0.grid()

    def k(x):
        x = as_vector(x, sys.n, 'state')
        zeta = proximal_aim(env, x)
        return grid[grid_argmin(sys.eval_batch(x[None, :], grid)
                                @ zeta)].copy()

    def k_rows(X):
        Z = proximal_aims(env, X)
        F = sys.eval_batch(X[:, None, :], grid[None, :, :])
        return grid[grid_argmin_rows(np.einsum('kgn,kn->kg', F, Z))]

    law = FeedbackLaw(k, sys.m, DISCONTINUOUS, PROXIMAL, U0,
                      name='proximal', batch=k_rows)
    law.envelope = env
    return law


def proximal_subgradient_test(V, x, zeta, mu: float, radius: float,
                              samples: int = 200, seed: int = 0):
    '''
        Checks V(y) >= V(x) + zeta . (y - x) - mu |y - x|^2 at samples y of
        the ball of given radius around x.

        Returns (ok, worst slack); ok means worst slack >= -1e-9.
    '''

    if radius <= 0:
        raise InvalidParams('radius must be positive')
    if samples < 100:
        raise InvalidParams('at least 100 samples are needed')
    value = V.values if hasattr(V, 'values') else (
        lambda Y: np.array([float(V(y)) for y in Y]))
    x = np.atleast_1d(np.asarray(x, float))
    zeta = np.atleast_1d(np.asarray(zeta, float))
    n = x.size
    if n == 1:
        d = np.linspace(-radius, radius, samples)[:, None]
    else:
        rng = np.random.default_rng(seed)
        d = rng.normal(size=(samples, n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        d *= radius * rng.uniform(size=(samples, 1)) ** (1.0 / n)
    Y = x + d
    slack = (value(Y) - float(value(x[None, :])[0]) - d @ zeta
             + mu * np.sum(d ** 2, axis=1))
    worst = float(slack.min())
    return worst >= -CHECK_TOL, worst


# ====================
#     VERIFICATION
# ====================


def gamma(clf: ContinuousCLF, s: float, R: float, resolution: int = 41
          ) -> float:
    '''
        Smallest W on the grid points of the annulus s <= |x| <= R (and on
        the sphere |x| = s).
    '''

    if clf.W is None:
        raise InvalidParams('%s has no decrease rate W' % clf.name)
    pts = annulus_grid(clf.n, s, R, resolution)
    sphere = _sphere(clf.n, s, max(16, resolution))
    vals = [float(clf.W(x)) for x in np.vstack([pts, sphere])]
    return min(vals)


def _sphere(n: int, s: float, points: int) -> np.ndarray:
    if n == 1:
        return np.array([[s], [-s]])
    if n == 2:
        th = 2 * np.pi * np.arange(points) / points
        return s * np.stack([np.cos(th), np.sin(th)], axis=-1)
    dirs = np.vstack([np.eye(n), -np.eye(n),
                      np.random.default_rng(0).normal(size=(points, n))])
    return s * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def envelope_decrease_check(env: MoreauEnvelope, sys: ControlSystem,
                            U0: ControlSet, r: float, R: float,
                            grid_resolution: int = 41,
                            fraction: float = None) -> VerificationReport:
    '''
        Checks min over U0 of zeta_alpha(x) . f(x, u) <= -fraction gamma(r)
        at every annulus grid point, gamma(r) being the smallest W on the
        annulus.
    '''

    fraction = DECREASE_FRACTION if fraction is None else fraction
    U0 = U0 or sys.control_set
    grid = U0.grid()
    g_r = gamma(env.base, r, R, grid_resolution)
    bound = -fraction * g_r
    pts = annulus_grid(sys.n, r, R, grid_resolution)

    def margin(x):
        zeta = proximal_aim(env, x)
        return float((sys.eval_batch(x[None, :], grid) @ zeta).min())

    margins = np.array(parallel_map(margin, pts))
    tol = CHECK_TOL * (1 + abs(bound))
    bad = np.flatnonzero(margins > bound + tol)
    info('nonsmooth_clf: envelope alpha=%g on %s, %d/%d annulus points '
         'violate the decrease bound %.6g', env.alpha, sys.name, len(bad),
         len(pts), bound)
    report = VerificationReport(
        [{'x': pts[i].tolist(), 'margin': float(margins[i]),
          'bound': bound} for i in bad], len(pts),
        {'r': r, 'R': R, 'grid_resolution': grid_resolution,
         'alpha': env.alpha, 'fraction': fraction, 'gamma_r': g_r},
        None, float((margins - bound).max()) if margins.size else None)
    return report


def envelope_grid(env: MoreauEnvelope, R: float, resolution: int = 41
                  ) -> pd.DataFrame:
    '''
        (x1, x2, Valpha) on the square [-R, R]^2, for plotting.
    '''

    if env.n != 2:
        raise InvalidParams('envelope grid export needs n = 2')
    axis = np.linspace(-R, R, resolution)
    X1, X2 = np.meshgrid(axis, axis, indexing='ij')
    pts = np.column_stack([X1.reshape(-1), X2.reshape(-1)])
    vals = parallel_map(lambda x: inf_convolve(env, x)[0], pts)
    return pd.DataFrame({'x1': pts[:, 0], 'x2': pts[:, 1], 'Valpha': vals})


def lipschitz_estimate(env: MoreauEnvelope, R: float, resolution: int = 21
                       ) -> dict:
    '''
        Lipschitz constants of V_alpha on the ball B_R: the closed-form
        bound sqrt(2 sup V) / alpha + R / alpha^2, the empirical bound
        1.1 max |zeta_alpha| and the largest difference quotient between
        neighboring grid points.
    '''

    n = env.n
    axis = np.linspace(-R, R, resolution)
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    shape = mesh[0].shape
    pts = np.stack([a.reshape(-1) for a in mesh], axis=-1)
    inside = np.linalg.norm(pts, axis=1) <= R * (1 + 1e-12)
    sup_v = float(env.base.values(pts[inside]).max())
    vals = np.array(parallel_map(lambda x: inf_convolve(env, x)[0], pts))
    zetas = np.array(parallel_map(
        lambda x: np.linalg.norm(proximal_aim(env, x)), pts[inside]))
    V = vals.reshape(shape)
    ins = inside.reshape(shape)
    step = axis[1] - axis[0]
    quotient = 0.0
    for ax in range(n):
        dv = np.abs(np.diff(V, axis=ax)) / step
        ok = np.logical_and(np.take(ins, range(resolution - 1), axis=ax),
                            np.take(ins, range(1, resolution), axis=ax))
        if np.any(ok):
            quotient = max(quotient, float(dv[ok].max()))
    return {'formula': float(np.sqrt(2 * sup_v) / env.alpha
                             + R / env.alpha ** 2),
            'empirical': 1.1 * float(zetas.max()),
            'difference_quotient': quotient}
