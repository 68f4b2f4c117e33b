'''
    Comparison functions: class K / K-infinity (KFunction) and class KL
    (KLFunction), their evaluation, inversion and composition, and empirical
    fitting of decay envelopes from trajectory bundles.

    Methods:
    --------
    k_eval(f, s), k_inverse(f), k_compose(f, g): Functional forms of the
    KFunction methods.

    check_kl_estimate(trajs, beta, eps): Flags every (trajectory, time) with
    |x(t)| > max{beta(|x0|, t), eps} + tol.

    fit_kl_envelope(trajs, eps): Fits sigma(s) exp(-lambda t) to a bundle.

    fit_k_envelope(s, v): Monotone piecewise-linear upper envelope of
    samples.
'''


from logging import info

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from clfstab.model import Model
from clfstab.consts import CHECK_TOL, MIN_K_SLOPE
from clfstab.errors import (OutOfRange, InvalidParams, UnboundedBundle,
                            InvalidBundle)
from clfstab.utils import parallel_map


# ==================
#     CLASS K
# ==================


class KFunction(Model):
    '''
        Class K function.

        Attributes:
        -----------
        kind: 'power' (s -> a s^p), 'piecewise_linear' (knots through (0, 0),
        linear extrapolation with the last slope) or 'compose' (outer of
        inner).

        domain_bound: Optional upper end of the domain.
    '''

    def __init__(self, kind: str, a: float = None, p: float = None,
                 knots=None, outer=None, inner=None,
                 domain_bound: float = None):
        self.kind = kind
        self.domain_bound = (None if domain_bound is None
                             else float(domain_bound))
        if kind == 'power':
            if not (a > 0 and p > 0):
                raise InvalidParams('power K function needs a > 0, p > 0')
            self.a, self.p = float(a), float(p)
        elif kind == 'piecewise_linear':
            self.knots = _monotone_knots(knots)
        elif kind == 'compose':
            self.outer, self.inner = outer, inner
        else:
            raise InvalidParams('unknown K function kind %r' % kind)

    def _check_domain(self, s: np.ndarray):
        if np.any(s < 0) or np.any(~np.isfinite(s)):
            raise OutOfRange('K function argument must be finite and >= 0')
        if self.domain_bound is not None and np.any(
                s > self.domain_bound * (1 + 1e-12)):
            raise OutOfRange('argument beyond domain bound %g'
                             % self.domain_bound)

    def __call__(self, s):
        s = np.asarray(s, float)
        self._check_domain(s)
        if self.kind == 'power':
            out = self.a * s ** self.p
        elif self.kind == 'piecewise_linear':
            k = np.asarray(self.knots)
            out = np.interp(s, k[:, 0], k[:, 1])
            slope = ((k[-1, 1] - k[-2, 1]) / (k[-1, 0] - k[-2, 0]))
            out = np.where(s > k[-1, 0], k[-1, 1] + slope * (s - k[-1, 0]),
                           out)
        else:
            out = np.asarray(self.outer(self.inner(s)), float)
        return float(out) if out.ndim == 0 else out

    def sup(self) -> float:
        '''
            Supremum of the range (inf for class K-infinity).
        '''

        if self.kind == 'compose':
            inner_sup = self.inner.sup()
            if inner_sup == float('inf'):
                return self.outer.sup()
            return float(self.outer(inner_sup))
        if self.domain_bound is None:
            return float('inf')
        return float(self(self.domain_bound))

    def inverse(self, v):
        '''
            Inverse function value; raises OutOfRange outside the range.
        '''

        v = np.asarray(v, float)
        if np.any(v < 0) or np.any(~np.isfinite(v)) or np.any(
                v > self.sup() * (1 + 1e-12)):
            raise OutOfRange('value outside the range of the K function')
        if self.kind == 'power':
            out = (v / self.a) ** (1.0 / self.p)
        elif self.kind == 'piecewise_linear':
            k = np.asarray(self.knots)
            out = np.interp(v, k[:, 1], k[:, 0])
            slope = ((k[-1, 1] - k[-2, 1]) / (k[-1, 0] - k[-2, 0]))
            out = np.where(v > k[-1, 1], k[-1, 0] + (v - k[-1, 1]) / slope,
                           out)
        else:
            out = self.inner.inverse(self.outer.inverse(v))
        return float(out) if np.ndim(out) == 0 else out

    def compose(self, inner: 'KFunction') -> 'KFunction':
        '''
            s -> self(inner(s)).
        '''

        return KFunction('compose', outer=self, inner=inner,
                         domain_bound=inner.domain_bound)

    def is_class_kinf(self) -> bool:
        if self.kind == 'compose':
            return self.outer.is_class_kinf() and self.inner.is_class_kinf()
        return self.domain_bound is None

    def is_class_k_on(self, grid) -> bool:
        '''
            Zero at 0 and strictly increasing on grid.
        '''

        grid = np.unique(np.asarray(grid, float))
        vals = np.asarray(self(grid), float)
        return (abs(float(self(0.0))) == 0.0
                and bool(np.all(np.diff(vals) > 0)))

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        if self.kind == 'power':
            d = {'kind': 'power', 'a': self.a, 'p': self.p}
        elif self.kind == 'piecewise_linear':
            d = {'kind': 'piecewise_linear',
                 'knots': [list(map(float, k)) for k in self.knots]}
        else:
            d = {'kind': 'compose', 'outer': self.outer.as_dict(),
                 'inner': self.inner.as_dict()}
        if self.domain_bound is not None:
            d['domain_bound'] = self.domain_bound
        return d

    @classmethod
    def from_dict(cls, d: dict):
        if d['kind'] == 'compose':
            return cls('compose', outer=cls.from_dict(d['outer']),
                       inner=cls.from_dict(d['inner']),
                       domain_bound=d.get('domain_bound'))
        return cls(d['kind'], a=d.get('a'), p=d.get('p'),
                   knots=d.get('knots'), domain_bound=d.get('domain_bound'))


def _monotone_knots(knots) -> list:
    k = np.asarray(knots, float).reshape(-1, 2)
    k = k[np.argsort(k[:, 0], kind='stable')]
    if k.shape[0] == 0 or k[0, 0] != 0.0:
        k = np.vstack([[0.0, 0.0], k])
    if np.any(k[:, 0] < 0) or np.any(~np.isfinite(k)):
        raise InvalidParams('knots must be finite with s >= 0')
    k[0, 1] = 0.0
    _, keep = np.unique(k[:, 0], return_index=True)
    k = k[np.sort(keep)]
    if k.shape[0] < 2:
        raise InvalidParams('piecewise-linear K function needs a knot s > 0')
    for i in range(1, k.shape[0]):
        k[i, 1] = max(k[i, 1], k[i - 1, 1] + MIN_K_SLOPE * (k[i, 0]
                                                           - k[i - 1, 0]))
    return k.tolist()


def power(a: float, p: float, domain_bound: float = None) -> KFunction:
    return KFunction('power', a=a, p=p, domain_bound=domain_bound)


def identity() -> KFunction:
    return power(1.0, 1.0)


def piecewise_linear(knots, domain_bound: float = None) -> KFunction:
    return KFunction('piecewise_linear', knots=knots,
                     domain_bound=domain_bound)


def k_eval(f: KFunction, s):
    return f(s)


def k_inverse(f: KFunction):
    return f.inverse


def k_compose(f: KFunction, g: KFunction) -> KFunction:
    return f.compose(g)


# ==================
#     CLASS KL
# ==================


class KLFunction(Model):
    '''
        Class KL function.

        Attributes:
        -----------
        kind: 'exp_envelope' ((s, t) -> sigma(s) exp(-lam t)) or 'tabulated'
        (bilinear interpolation on an (s, t) grid; linear in s beyond the
        grid, constant in t beyond the grid).

        sigma, lam: exp_envelope data.

        s_grid, t_grid, values: tabulated data.
    '''

    _transient = ('interp',)

    def __init__(self, kind: str, sigma: KFunction = None, lam: float = None,
                 s_grid=None, t_grid=None, values=None):
        self.kind = kind
        if kind == 'exp_envelope':
            if lam is None or lam < 0 or not np.isfinite(lam):
                raise InvalidParams('decay rate must be finite and >= 0')
            self.sigma, self.lam = sigma, float(lam)
        elif kind == 'tabulated':
            self.s_grid = np.asarray(s_grid, float)
            self.t_grid = np.asarray(t_grid, float)
            self.values = _monotone_table(np.asarray(values, float))
            self.interp = RegularGridInterpolator(
                (self.s_grid, self.t_grid), self.values)
        else:
            raise InvalidParams('unknown KL function kind %r' % kind)

    def __call__(self, s, t):
        s = np.asarray(s, float)
        t = np.asarray(t, float)
        if self.kind == 'exp_envelope':
            out = np.asarray(self.sigma(s)) * np.exp(-self.lam * t)
        else:
            s, t = np.broadcast_arrays(s, t)
            smax = self.s_grid[-1]
            sc = np.clip(s, 0, smax)
            tc = np.clip(t, self.t_grid[0], self.t_grid[-1])
            out = self.interp(np.stack([sc, tc], axis=-1))
            out = np.where(s > smax, out * s / smax, out)
        return float(out) if np.ndim(out) == 0 else out

    def is_class_kl(self) -> bool:
        if self.kind == 'exp_envelope':
            return self.lam > 0
        return bool(np.all(self.values[:, -1] <= self.values[:, 0]))

    def tabulate(self, s_grid, t_grid) -> 'KLFunction':
        s_grid = np.asarray(s_grid, float)
        t_grid = np.asarray(t_grid, float)
        S, T = np.meshgrid(s_grid, t_grid, indexing='ij')
        return KLFunction('tabulated', s_grid=s_grid, t_grid=t_grid,
                          values=self(S, T))

    def monotone_on(self, s_grid, t_grid, tol: float = 1e-9) -> bool:
        '''
            Nondecreasing in s and nonincreasing in t on the grid.
        '''

        S, T = np.meshgrid(np.asarray(s_grid, float),
                           np.asarray(t_grid, float), indexing='ij')
        vals = np.asarray(self(S, T))
        return bool(np.all(np.diff(vals, axis=0) >= -tol)
                    and np.all(np.diff(vals, axis=1) <= tol))

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        if self.kind == 'exp_envelope':
            return {'kind': 'exp_envelope', 'sigma': self.sigma.as_dict(),
                    'lam': self.lam}
        return {'kind': 'tabulated', 's_grid': self.s_grid.tolist(),
                't_grid': self.t_grid.tolist(),
                'values': self.values.tolist()}

    @classmethod
    def from_dict(cls, d: dict):
        if d['kind'] == 'exp_envelope':
            return cls('exp_envelope', sigma=KFunction.from_dict(d['sigma']),
                       lam=d['lam'])
        return cls('tabulated', s_grid=d['s_grid'], t_grid=d['t_grid'],
                   values=d['values'])


def _monotone_table(values: np.ndarray) -> np.ndarray:
    values = np.maximum.accumulate(np.maximum(values, 0.0), axis=0)
    return np.minimum.accumulate(values, axis=1)


def exp_envelope(sigma: KFunction, lam: float) -> KLFunction:
    return KLFunction('exp_envelope', sigma=sigma, lam=lam)


# ===============
#     REPORTS
# ===============


class EnvelopeReport(Model):
    '''
        Result of checking trajectories against an envelope.

        Attributes:
        -----------
        violations: Rows {trajectory, time, norm, bound} where the norm
        exceeds the bound plus tolerance.

        max_ratio: Largest norm / (bound + tol); violations is empty iff
        max_ratio <= 1.

        checked: Number of (trajectory, time) points checked.
    '''

    def __init__(self, violations: list = None, max_ratio: float = 0.0,
                 checked: int = 0):
        self.violations = list(violations or [])
        self.max_ratio = float(max_ratio)
        self.checked = int(checked)

    @property
    def passed(self) -> bool:
        return not self.violations

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        d = super().as_dict(flat, _prefix)
        d['passed'] = self.passed
        return d

    @classmethod
    def from_dict(cls, d: dict):
        return cls(d.get('violations'), d.get('max_ratio', 0.0),
                   d.get('checked', 0))


def tolerance(bound) -> np.ndarray:
    return CHECK_TOL * (1 + np.asarray(bound, float))


def envelope_rows(traj_id, times, norms, bounds):
    '''
        (violation rows, max ratio) of norms against bounds.
    '''

    bounds = np.asarray(bounds, float)
    tol = tolerance(bounds)
    with np.errstate(invalid='ignore', over='ignore'):
        ratios = np.asarray(norms, float) / (bounds + tol)
    ratios = np.where(np.isfinite(ratios), ratios, np.inf)
    rows = [{'trajectory': traj_id, 'time': float(times[i]),
             'norm': float(norms[i]), 'bound': float(bounds[i])}
            for i in np.flatnonzero(ratios > 1.0)]
    return rows, float(ratios.max()) if ratios.size else 0.0


def merge_rows(parts) -> EnvelopeReport:
    '''
        Merges per-trajectory (rows, max ratio, count) in bundle order.
    '''

    violations, max_ratio, checked = [], 0.0, 0
    for rows, ratio, count in parts:
        violations.extend(rows)
        max_ratio = max(max_ratio, ratio)
        checked += count
    return EnvelopeReport(violations, max_ratio, checked)


def check_kl_estimate(trajs: list, beta: KLFunction, eps: float = 0.0
                      ) -> EnvelopeReport:
    '''
        Checks |x(t)| <= max{beta(|x0|, t), eps} along every trajectory.
    '''

    if eps < 0:
        raise InvalidParams('eps must be >= 0')

    def one(traj):
        bounds = np.maximum(beta(traj.x0_norm, traj.times), eps)
        rows, ratio = envelope_rows(traj.id, traj.times, traj.norms(),
                                    np.broadcast_to(bounds,
                                                    traj.times.shape))
        return rows, ratio, traj.times.size

    return merge_rows(parallel_map(one, trajs))


def fit_kl_envelope(trajs: list, eps: float = 0.0) -> KLFunction:
    '''
        Fits beta(s, t) = a s exp(-lam t) to a bundle. lam comes from a
        log-domain least-squares fit clipped at 0, then a is inflated until
        every point above the floor eps lies under the envelope.

        Raises UnboundedBundle if a trajectory escaped and InvalidBundle if
        a trajectory from the origin leaves the floor.
    '''

    if not trajs:
        raise InvalidBundle('empty trajectory bundle')
    ts, logs = [], []
    for traj in trajs:
        if traj.escaped or not np.all(np.isfinite(traj.states)):
            raise UnboundedBundle('trajectory %s escaped' % traj.id,
                                  trajectory=traj.id)
        norms = traj.norms()
        s = traj.x0_norm
        if s == 0.0:
            if np.any(norms > eps + tolerance(eps)):
                raise InvalidBundle('trajectory %s starts at 0 but leaves '
                                    'the floor' % traj.id)
            continue
        above = norms > max(eps, 1e-300)
        ts.append(traj.times[above])
        logs.append(np.log(norms[above] / s))
    t = np.concatenate(ts) if ts else np.zeros(0)
    y = np.concatenate(logs) if logs else np.zeros(0)

    lam = 0.0
    if t.size >= 2 and np.ptp(t) > 0:
        slope = np.polyfit(t, y, 1)[0]
        lam = max(0.0, -float(slope))
    a = float(np.exp((y + lam * t).max())) if t.size else 1.0
    a = max(a, 1e-300)
    beta = exp_envelope(power(a, 1.0), lam)
    for _ in range(60):
        if check_kl_estimate(trajs, beta, eps).passed:
            break
        a *= 1 + 1e-9
        beta = exp_envelope(power(a, 1.0), lam)
    info('comparison: fitted KL envelope a=%.6g lambda=%.6g on %d '
         'trajectories', a, lam, len(trajs))
    return beta


def fit_k_envelope(s, v) -> KFunction:
    '''
        Smallest nondecreasing piecewise-linear function through the
        samples, made strictly increasing with the minimum knot slope.
    '''

    s = np.asarray(s, float)
    v = np.asarray(v, float)
    keep = np.isfinite(v) & (s > 0)
    if not np.any(keep):
        raise InvalidParams('no finite samples with s > 0')
    s, v = s[keep], np.maximum(v[keep], 0.0)
    order = np.argsort(s, kind='stable')
    s, v = s[order], v[order]
    us = np.unique(s)
    uv = np.array([v[s == x].max() for x in us])
    uv = np.maximum.accumulate(uv)
    return piecewise_linear(np.column_stack([us, uv]))
