'''
    Necessary conditions for continuous stabilizability (Brockett): the
    image of (x, u) -> f(x, u) over small neighborhoods of the origin must
    contain a neighborhood of 0.

    The rank tests are exact; onto_neighborhood_probe only samples targets
    and reports failure as empirical evidence.

    Methods:
    --------
    brockett_linear_test(A, B): rank [A B] = n.

    brockett_driftless_test(sys): rank G(0) = m < n on a driftless system.

    onto_neighborhood_probe(sys, x_radius, u_radius, n_targets, budget):
    Least-squares reachability of targets on a small sphere.

    check_brockett(sys): Every applicable test, with a combined verdict.
'''


from logging import info

import numpy as np
from scipy.linalg import qr, svd
from scipy.optimize import least_squares

from clfstab.model import Model
from clfstab.consts import (FAILS, INCONCLUSIVE, EXACT, EMPIRICAL,
                            RANK_RTOL)
from clfstab.errors import (DimensionMismatch, InvalidParams,
                            PreconditionFailed, NotAffine)
from clfstab.systems import ControlSystem, affine_parts, linearize
from clfstab.utils import parallel_map


SAMPLES = 32


class BrockettVerdict(Model):
    '''
        Outcome of a Brockett test.

        Attributes:
        -----------
        status: 'fails_necessary_condition' or 'inconclusive'.

        witness: Target that appears unreachable, or rank data; required
        when the test fails.

        strength: 'exact' for rank tests, 'empirical' for the probe.

        test: Name of the producing test.
    '''

    def __init__(self, status: str, witness: dict = None,
                 strength: str = EXACT, test: str = ''):
        if status not in (FAILS, INCONCLUSIVE):
            raise InvalidParams('unknown verdict status %r' % status)
        if status == FAILS and witness is None:
            raise InvalidParams('a failing verdict needs a witness')
        self.status = status
        self.witness = witness
        self.strength = strength
        self.test = test

    @property
    def fails(self) -> bool:
        return self.status == FAILS


def _rank(M: np.ndarray) -> int:
    '''
        Rank by QR with column pivoting, tolerance 1e-10 ||M||.
    '''

    scale = np.linalg.norm(M, 2) if M.size else 0.0
    if scale == 0.0:
        return 0
    R = qr(M, mode='r', pivoting=True)[0]
    diag = np.abs(np.diag(R))
    return int(np.sum(diag > RANK_RTOL * scale))


def _left_null(M: np.ndarray, rank: int) -> np.ndarray:
    U = svd(M)[0] if M.size else np.eye(M.shape[0])
    v = U[:, rank]
    i = np.argmax(np.abs(v))
    return v if v[i] > 0 else -v


def brockett_linear_test(A, B) -> BrockettVerdict:
    '''
        A linear system x' = A x + B u fails Brockett's condition iff
        rank [A B] < n; the witness spans the left null space.
    '''

    A = np.atleast_2d(np.asarray(A, float))
    B = np.asarray(B, float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n:
        raise DimensionMismatch('A is %s and B is %s' % (A.shape, B.shape))
    M = np.hstack([A, B])
    rank = _rank(M)
    if rank < n:
        return BrockettVerdict(FAILS, {'rank': rank, 'n': n,
                                       'p': _left_null(M, rank).tolist()},
                               EXACT, 'linear')
    return BrockettVerdict(INCONCLUSIVE, {'rank': rank, 'n': n}, EXACT,
                           'linear')


def _samples(n: int, radius: float, count: int = SAMPLES, seed: int = 0):
    return np.random.default_rng(seed).uniform(-radius, radius, (count, n))


def is_driftless(sys: ControlSystem, radius: float = 1.0) -> bool:
    if not sys.affine:
        return False
    return all(np.allclose(affine_parts(sys, x)[0], 0.0, atol=1e-12)
               for x in _samples(sys.n, radius))


def is_linear(sys: ControlSystem, radius: float = 1.0):
    '''
        Returns (A, B) if sys is x' = A x + B u on sampled states, else
        None.
    '''

    if not sys.affine:
        return None
    A, B = linearize(sys)
    for x in _samples(sys.n, radius):
        f0, G = affine_parts(sys, x)
        if not (np.allclose(f0, A @ x, atol=1e-6)
                and np.allclose(G, B, atol=1e-6)):
            return None
    return A, B


def brockett_driftless_test(sys: ControlSystem) -> BrockettVerdict:
    '''
        x' = G(x) u with m < n and rank G(0) = m cannot be continuously
        stabilized: targets outside Im G(0) are unreachable near 0. The
        witness is the unit vector of the complement with a positive
        largest entry.
    '''

    if not sys.affine:
        raise NotAffine('%s has no control-affine decomposition' % sys.name)
    if not is_driftless(sys):
        raise PreconditionFailed('%s has a drift term' % sys.name)
    G0 = affine_parts(sys, np.zeros(sys.n))[1]
    rank = _rank(G0)
    if sys.m < sys.n and rank == sys.m:
        return BrockettVerdict(FAILS, {'rank': rank, 'm': sys.m, 'n': sys.n,
                                       'p': _left_null(G0, rank).tolist()},
                               EXACT, 'driftless')
    return BrockettVerdict(INCONCLUSIVE, {'rank': rank, 'm': sys.m,
                                          'n': sys.n}, EXACT, 'driftless')


def probe_targets(n: int, scale: float, count: int, seed: int = 0
                  ) -> np.ndarray:
    '''
        count points on the sphere |p| = scale: +-e_i first, then seeded
        directions (evenly spaced angles for n = 2).
    '''

    axes = np.vstack([np.eye(n), -np.eye(n)])
    if n == 1:
        return scale * axes
    if n == 2:
        th = 2 * np.pi * np.arange(max(count, 4)) / max(count, 4)
        return scale * np.stack([np.cos(th), np.sin(th)], axis=-1)
    extra = np.random.default_rng(seed).normal(size=(max(count - 2 * n, 0),
                                                     n))
    dirs = np.vstack([axes, extra])
    return scale * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _best_residual(sys: ControlSystem, p: np.ndarray, lo: np.ndarray,
                   hi: np.ndarray, budget: int, starts: int, seed: int):
    n = sys.n
    f = sys.f
    rng = np.random.default_rng(seed)

    def residual(z):
        return np.asarray(f(z[:n], z[n:]), float).reshape(n) - p

    best, arg = np.inf, None
    for _ in range(starts):
        z0 = rng.uniform(lo, hi) * 0.9
        sol = least_squares(residual, z0, bounds=(lo, hi), max_nfev=budget,
                            xtol=1e-15, ftol=1e-15, gtol=1e-15)
        res = float(np.linalg.norm(sol.fun))
        if res < best:
            best, arg = res, sol.x
        if best <= 1e-6 * np.linalg.norm(p):
            break
    return best, arg


def onto_neighborhood_probe(sys: ControlSystem, x_radius: float = 0.5,
                            u_radius: float = 1.0, n_targets: int = 32,
                            budget: int = 200, starts: int = 4,
                            seed: int = 0, threads: int = None
                            ) -> BrockettVerdict:
    '''
        Tries to solve f(x, u) = p by bounded least squares over the box
        |x_i| <= x_radius, |u_j| <= u_radius for targets p on the sphere of
        radius 0.1 x_radius. A target is hit when the residual falls below
        1e-6 |p| within the budget. The verdict fails if some target is
        missed; the witness is the worst target.
    '''

    if not (x_radius > 0 and u_radius > 0):
        raise InvalidParams('probe radii must be positive')
    if n_targets < 1 or budget < 1 or starts < 1:
        raise InvalidParams('probe needs targets, budget and starts')
    scale = 0.1 * x_radius
    targets = probe_targets(sys.n, scale, n_targets, seed)
    lo = np.concatenate([np.full(sys.n, -x_radius), np.full(sys.m,
                                                            -u_radius)])
    hi = -lo
    results = parallel_map(
        lambda ip: _best_residual(sys, ip[1], lo, hi, budget, starts,
                                  seed + ip[0]),
        list(enumerate(targets)), threads)
    ratios = np.array([res / np.linalg.norm(p)
                       for (res, _), p in zip(results, targets)])
    missed = int(np.sum(ratios > 1e-6))
    worst = int(np.argmax(ratios))
    info('obstructions: probe on %s missed %d of %d targets', sys.name,
         missed, len(targets))
    report = {'targets': len(targets), 'missed': missed,
              'scale': scale, 'p': targets[worst].tolist(),
              'relative_residual': float(ratios[worst])}
    if missed:
        return BrockettVerdict(FAILS, report, EMPIRICAL, 'probe')
    return BrockettVerdict(INCONCLUSIVE, report, EMPIRICAL, 'probe')


def check_brockett(sys: ControlSystem, probe: bool = True, **probe_args
                   ) -> dict:
    '''
        Runs the linear test on linear systems, the driftless test on
        driftless ones and the probe on every system. An exact failure
        decides the status; a probe failure alone fails with empirical
        strength.
    '''

    tests = {}
    linear = is_linear(sys)
    if linear is not None:
        tests['linear'] = brockett_linear_test(*linear)
    if is_driftless(sys):
        tests['driftless'] = brockett_driftless_test(sys)
    if probe:
        tests['probe'] = onto_neighborhood_probe(sys, **probe_args)

    exact = [v for v in tests.values() if v.strength == EXACT and v.fails]
    if exact:
        status, strength, witness = FAILS, EXACT, exact[0].witness
    elif any(v.fails for v in tests.values()):
        status, strength, witness = FAILS, EMPIRICAL, tests['probe'].witness
    else:
        status, strength, witness = INCONCLUSIVE, None, None
    return {'system': sys.name, 'status': status, 'strength': strength,
            'witness': witness,
            'tests': {k: v.as_dict() for k, v in tests.items()}}
