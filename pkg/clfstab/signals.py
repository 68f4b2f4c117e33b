'''
    Time signals used as measurement errors, additive disturbances and
    exogenous inputs. A Signal is called as signal(t, x) and returns a vector
    of its dimension; its sup_norm is exact for every generator.

    Generators:
    -----------
    zero, constant(value), sinusoid(amp, freq, phase, direction),
    piecewise(seed, dwell, amp): seeded piecewise-constant values in the
    ball of radius amp, pulse(value, start, width), radial(amp): amp*x/|x|,
    ridge_flip(amp): -amp*sign(x1)*e1, callback(fn, bound): user function
    clipped to the ball of radius bound.

    Text form (command line): zero | constant:v1,v2 | sinusoid:amp:freq[:phase]
    | piecewise:seed:dwell:amp | pulse:v1,v2:start:width | radial:amp |
    ridge:amp
'''


from math import pi

import numpy as np

from clfstab.model import Model
from clfstab.errors import InvalidPerturbation, InvalidParams
from clfstab.utils import as_vector, parse_vector


KINDS = ('zero', 'constant', 'sinusoid', 'piecewise', 'pulse', 'radial',
         'ridge_flip', 'callback')


class Signal(Model):
    '''
        Bounded time signal.

        Attributes:
        -----------
        kind: Generator name (see KINDS).

        dim: Output dimension.

        params: Generator parameters.

        sup_norm: Exact bound on |signal(t, x)|.
    '''

    _transient = ('fn',)

    def __init__(self, kind: str, dim: int, params: dict = None, fn=None):
        if kind not in KINDS:
            raise InvalidPerturbation('unknown signal kind %r' % kind)
        if int(dim) < 1:
            raise InvalidPerturbation('signal dimension must be positive')
        self.kind = kind
        self.dim = int(dim)
        self.params = dict(params or {})
        self.fn = fn
        if kind == 'callback' and fn is None:
            raise InvalidPerturbation('callback signal needs a function')
        self.sup_norm = self._sup()
        if self.sup_norm < 0 or not np.isfinite(self.sup_norm):
            raise InvalidPerturbation('signal bound must be finite and >= 0')
        self._cache = {}

    def _sup(self):
        p = self.params
        if self.kind == 'zero':
            return 0.0
        if self.kind in ('constant', 'pulse'):
            return float(np.linalg.norm(as_vector(p['value'], self.dim)))
        if self.kind == 'callback':
            return float(p['bound'])
        return abs(float(p['amp']))

    def __call__(self, t: float, x=None) -> np.ndarray:
        p = self.params
        kind = self.kind
        if kind == 'zero':
            return np.zeros(self.dim)
        if kind == 'constant':
            return as_vector(p['value'], self.dim).copy()
        if kind == 'pulse':
            on = p['start'] <= t < p['start'] + p['width']
            return as_vector(p['value'], self.dim) * (1.0 if on else 0.0)
        if kind == 'sinusoid':
            return (p['amp'] * np.sin(2 * pi * p['freq'] * t
                                      + p.get('phase', 0.0))
                    * self._direction())
        if kind == 'piecewise':
            return self._piece(int(np.floor(t / p['dwell'] + 1e-12)))
        if kind == 'radial':
            x = np.zeros(self.dim) if x is None else np.asarray(x, float)
            nx = np.linalg.norm(x)
            if nx == 0:
                return np.zeros(self.dim)
            return p['amp'] * x / nx
        if kind == 'ridge_flip':
            x1 = 0.0 if x is None else float(np.asarray(x, float)[0])
            out = np.zeros(self.dim)
            out[0] = -p['amp'] * (1.0 if x1 >= 0 else -1.0)
            return out
        v = as_vector(self.fn(t, x), self.dim)
        nv = np.linalg.norm(v)
        bound = p['bound']
        if nv > bound:
            v = v * (bound / nv)
        return v

    def _direction(self):
        d = self.params.get('direction')
        d = np.ones(self.dim) if d is None else as_vector(d, self.dim)
        return d / np.linalg.norm(d)

    def _piece(self, k: int) -> np.ndarray:
        if k not in self._cache:
            rng = np.random.default_rng([int(self.params['seed']), k])
            v = rng.normal(size=self.dim)
            v /= max(np.linalg.norm(v), 1e-300)
            self._cache[k] = self.params['amp'] * rng.uniform() * v
        return self._cache[k]

    def norms(self, times, states=None) -> np.ndarray:
        '''
            |signal(t, x)| along a sampled trajectory.
        '''

        if states is None:
            return np.array([np.linalg.norm(self(t)) for t in times])
        return np.array([np.linalg.norm(self(t, x))
                         for t, x in zip(times, states)])

    @classmethod
    def from_dict(cls, d: dict):
        if d['kind'] == 'callback':
            raise InvalidPerturbation('callback signals cannot be restored')
        return cls(d['kind'], d['dim'], d.get('params'))


# ==================
#     GENERATORS
# ==================


def zero(dim: int) -> Signal:
    return Signal('zero', dim)


def constant(value, dim: int = None) -> Signal:
    value = np.atleast_1d(np.asarray(value, float))
    return Signal('constant', dim or value.size, {'value': value.tolist()})


def sinusoid(amp: float, freq: float, phase: float = 0.0, dim: int = 1,
             direction=None) -> Signal:
    params = {'amp': float(amp), 'freq': float(freq), 'phase': float(phase)}
    if direction is not None:
        params['direction'] = list(map(float, direction))
    return Signal('sinusoid', dim, params)


def piecewise(seed: int, dwell: float, amp: float, dim: int = 1) -> Signal:
    if dwell <= 0:
        raise InvalidPerturbation('dwell must be positive')
    return Signal('piecewise', dim, {'seed': int(seed), 'dwell': float(dwell),
                                     'amp': float(amp)})


def pulse(value, start: float, width: float, dim: int = None) -> Signal:
    value = np.atleast_1d(np.asarray(value, float))
    return Signal('pulse', dim or value.size, {
        'value': value.tolist(), 'start': float(start),
        'width': float(width)})


def radial(amp: float, dim: int) -> Signal:
    return Signal('radial', dim, {'amp': float(amp)})


def ridge_flip(amp: float, dim: int) -> Signal:
    return Signal('ridge_flip', dim, {'amp': float(amp)})


def callback(fn, bound: float, dim: int) -> Signal:
    return Signal('callback', dim, {'bound': float(bound)}, fn=fn)


def scaled(signal: Signal, factor: float) -> Signal:
    '''
        Same generator with its amplitude multiplied by factor.
    '''

    d = signal.as_dict()
    params = dict(d['params'])
    if signal.kind == 'zero':
        return signal
    if signal.kind in ('constant', 'pulse'):
        params['value'] = [factor * v for v in params['value']]
    elif signal.kind == 'callback':
        return callback(signal.fn, factor * params['bound'], signal.dim)
    else:
        params['amp'] = factor * params['amp']
    return Signal(signal.kind, signal.dim, params)


def parse_signal(text: str, dim: int) -> Signal:
    '''
        Builds a Signal from its text form.

        Raises InvalidPerturbation on malformed text.
    '''

    try:
        kind, _, rest = (text or 'zero').strip().partition(':')
        args = rest.split(':') if rest else []
        if kind == 'zero':
            return zero(dim)
        if kind == 'constant':
            return constant(_fill(parse_vector(args[0]), dim), dim)
        if kind == 'sinusoid':
            return sinusoid(float(args[0]), float(args[1]),
                            float(args[2]) if len(args) > 2 else 0.0, dim)
        if kind == 'piecewise':
            return piecewise(int(args[0]), float(args[1]), float(args[2]),
                             dim)
        if kind == 'pulse':
            return pulse(_fill(parse_vector(args[0]), dim), float(args[1]),
                         float(args[2]), dim)
        if kind == 'radial':
            return radial(float(args[0]), dim)
        if kind in ('ridge', 'ridge_flip'):
            return ridge_flip(float(args[0]), dim)
    except InvalidPerturbation:
        raise
    except (IndexError, ValueError, InvalidParams) as e:
        raise InvalidPerturbation('malformed signal %r (%s)' % (text, e))
    raise InvalidPerturbation('unknown signal kind in %r' % text)


def _fill(vec: np.ndarray, dim: int) -> np.ndarray:
    if vec.size == 1 and dim > 1:
        return np.full(dim, vec[0])
    return vec
