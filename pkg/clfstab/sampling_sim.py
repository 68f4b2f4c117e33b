'''
    Sampling schedules, pi-trajectories (sample-and-hold feedback with
    measurement error and additive disturbance), classical closed-loop
    integration, the sizing constants of the sampled stabilization argument
    and the robust-stabilization experiment built on them.

    Integration is fixed-step RK4: SIMULATION:SUBSTEPS steps per sampling
    interval for pi-trajectories, SIMULATION:CLASSICAL_STEP for classical
    runs. A trajectory stops with escaped set when |x| exceeds
    SIMULATION:BLOWUP_BOUND or a step produces a non-finite state.

    Methods:
    --------
    uniform_schedule(h, t_end), jittered_schedule(h, jitter, seed, t_end):
    Sampling schedules truncated at the horizon.

    simulate_pi_trajectory(sys, k, schedule, x0, pert): Sampled closed loop
    x' = f(x, k(x(t_i) + e(t_i))) + d(t).

    simulate_pi_batch(sys, k, schedule, X0, perts): The same for many initial
    states sharing a schedule, advanced together.

    simulate_classical(sys, k, x0, t_end, step): x' = f(x, k(x)).

    constants_for(target, sys, r, R): Sizing constants.

    robust_stabilization_experiment(sys, env, U0, r, R, schedules,
    perturbations): Containment and entry checks over a grid of cells. Cells
    sharing a schedule run as one batch.
'''


from math import ceil
from logging import info, warning

import numpy as np
import pandas as pd

from clfstab.model import Model
from clfstab.consts import CHECK_TOL, DISCONTINUOUS
from clfstab.errors import (NonFiniteState, RefusedDiscontinuous,
                            PreconditionFailed, InvalidParams,
                            InvalidPerturbation, DimensionMismatch)
from clfstab.systems import ControlSystem, ControlSet, Trajectory
from clfstab.signals import Signal, zero
from clfstab.clf_smooth import FeedbackLaw
from clfstab.nonsmooth_clf import (MoreauEnvelope, ContinuousCLF,
                                   inf_convolve, inf_convolve_batch,
                                   proximal_aims, proximal_feedback, gamma)
from clfstab.utils import as_vector, parallel_map, write_csv
from clfstab import config


SUBSTEPS = config.get_int('SIMULATION_SUBSTEPS', 16)
BLOWUP_BOUND = config.get_float('SIMULATION_BLOWUP_BOUND', 1e6)
CLASSICAL_STEP = config.get_float('SIMULATION_CLASSICAL_STEP', 1e-3)
DECREASE_FRACTION = config.get_float('SYNTHESIS_DECREASE_FRACTION', 0.5)
LIPSCHITZ = config.get_str('ENVELOPE_LIPSCHITZ', 'empirical')
ALPHA_FACTOR = config.get_float('SIZING_ALPHA_FACTOR', 0.1)
SAMPLING_FACTOR = config.get_float('SIZING_SAMPLING_FACTOR', 0.125)
BAND_RATIO = config.get_float('SIZING_BAND_RATIO', 0.5)
T_FACTOR = config.get_float('SIZING_T_FACTOR', 2.0)

if LIPSCHITZ not in ('empirical', 'formula'):
    warning(' *** WARNING in sampling_sim: ENVELOPE:LIPSCHITZ parameter '
            'invalid in conf.yml. Defaulting to empirical.')
    LIPSCHITZ = 'empirical'


# =================
#     SCHEDULES
# =================


class SamplingSchedule(Model):
    '''
        Sampling schedule pi = {t_i}, starting at 0, truncated once the
        horizon is covered.

        Attributes:
        -----------
        times: Strictly increasing sampling times.

        horizon: Horizon the schedule was built for (last time >= horizon).
    '''

    def __init__(self, times, horizon: float = None):
        self.times = np.asarray(times, float)
        if self.times.size < 2 or self.times[0] != 0.0:
            raise InvalidParams('schedule needs at least two times, from 0')
        if np.any(np.diff(self.times) <= 0):
            raise InvalidParams('schedule times must be strictly increasing')
        self.horizon = float(self.times[-1] if horizon is None else horizon)

    @property
    def diameter(self) -> float:
        return float(np.diff(self.times).max())

    @property
    def lower_diameter(self) -> float:
        return float(np.diff(self.times).min())

    def as_dict(self, flat: bool = False, _prefix: str = ''):
        d = super().as_dict(flat, _prefix)
        d['diameter'] = self.diameter
        d['lower_diameter'] = self.lower_diameter
        return d

    @classmethod
    def from_dict(cls, d: dict):
        return cls(d['times'], d.get('horizon'))


def uniform_schedule(h: float, t_end: float) -> SamplingSchedule:
    '''
        t_i = i h, up to the first time >= t_end.
    '''

    if not h > 0 or not t_end > 0:
        raise InvalidParams('uniform schedule needs h > 0 and t_end > 0')
    count = max(1, ceil(t_end / h - 1e-12))
    return SamplingSchedule(h * np.arange(count + 1), t_end)


def jittered_schedule(h: float, jitter: float, seed: int, t_end: float
                      ) -> SamplingSchedule:
    '''
        Gaps drawn uniformly in [h (1 - jitter), h (1 + jitter)],
        deterministic per seed.
    '''

    if not h > 0 or not t_end > 0:
        raise InvalidParams('jittered schedule needs h > 0 and t_end > 0')
    if not 0 <= jitter < 1:
        raise InvalidParams('jitter fraction must lie in [0, 1)')
    rng = np.random.default_rng(int(seed))
    times = [0.0]
    while times[-1] < t_end:
        times.append(times[-1] + h * (1 + jitter * rng.uniform(-1, 1)))
    return SamplingSchedule(times, t_end)


class ScheduleSpec(Model):
    '''
        Schedule recipe built against a horizon.

        Attributes:
        -----------
        kind: 'uniform' or 'jitter'.

        h: Nominal sampling period.

        jitter: Jitter fraction (jitter only).

        seed: Seed (jitter only).
    '''

    def __init__(self, kind: str, h: float, jitter: float = 0.0,
                 seed: int = 0):
        if kind not in ('uniform', 'jitter'):
            raise InvalidParams('unknown schedule kind %r' % kind)
        if not h > 0:
            raise InvalidParams('sampling period must be positive')
        if not 0 <= jitter < 1:
            raise InvalidParams('jitter fraction must lie in [0, 1)')
        self.kind = kind
        self.h = float(h)
        self.jitter = float(jitter)
        self.seed = int(seed)

    def build(self, t_end: float) -> SamplingSchedule:
        if self.kind == 'uniform':
            return uniform_schedule(self.h, t_end)
        return jittered_schedule(self.h, self.jitter, self.seed, t_end)

    def bounds(self):
        '''
            (lower diameter, diameter) guaranteed by construction.
        '''

        return self.h * (1 - self.jitter), self.h * (1 + self.jitter)

    def __str__(self):
        if self.kind == 'uniform':
            return 'uniform:%g' % self.h
        return 'jitter:%g:%g:%d' % (self.h, self.jitter, self.seed)


def parse_schedule(text: str) -> ScheduleSpec:
    '''
        uniform:h | jitter:h:j:seed
    '''

    try:
        parts = text.split(':')
        if parts[0] == 'uniform':
            return ScheduleSpec('uniform', float(parts[1]))
        if parts[0] == 'jitter':
            return ScheduleSpec('jitter', float(parts[1]), float(parts[2]),
                                int(parts[3]) if len(parts) > 3 else 0)
    except (IndexError, ValueError) as e:
        raise InvalidParams('malformed schedule %r (%s)' % (text, e))
    raise InvalidParams('unknown schedule kind in %r' % text)


# =====================
#     PERTURBATIONS
# =====================


class PerturbationSpec(Model):
    '''
        Measurement error e and additive disturbance d, both signals of the
        state dimension.

        Attributes:
        -----------
        e: Measurement error signal.

        d: Disturbance signal (added to the state derivative).

        eps_bar, d_bar: Declared sup bounds of e and d.
    '''

    def __init__(self, n: int, e: Signal = None, d: Signal = None):
        self.e = e or zero(n)
        self.d = d or zero(n)
        if self.e.dim != n or self.d.dim != n:
            raise InvalidPerturbation('perturbation signals must have '
                                      'dimension %d' % n)
        self.eps_bar = self.e.sup_norm
        self.d_bar = self.d.sup_norm

    @classmethod
    def from_dict(cls, d: dict):
        e = Signal.from_dict(d['e'])
        return cls(e.dim, e, Signal.from_dict(d['d']))


# ====================
#     TRAJECTORIES
# ====================


class PiTrajectory(Model):
    '''
        Sampled closed-loop trajectory.

        Attributes:
        -----------
        schedule: SamplingSchedule.

        times, states: Dense output at integrator steps.

        held_controls: u_i held on [t_i, t_{i+1}).

        sample_times, sample_states: x(t_i) for the simulated samples.

        sample_index: Index of each sample instant in times.

        errors: e(t_i) used at each sample.

        V, Valpha: CLF and envelope values at the samples (optional).

        escaped, escape_time: Blow-up detection.
    '''

    def __init__(self, schedule: SamplingSchedule, times, states,
                 held_controls, sample_index, errors, V=None, Valpha=None,
                 escaped: bool = False, escape_time: float = None):
        self.schedule = schedule
        self.times = np.asarray(times, float)
        self.states = np.asarray(states, float)
        self.held_controls = np.asarray(held_controls, float)
        self.sample_index = np.asarray(sample_index, int)
        self.errors = np.asarray(errors, float)
        self.V = None if V is None else np.asarray(V, float)
        self.Valpha = None if Valpha is None else np.asarray(Valpha, float)
        self.escaped = bool(escaped)
        self.escape_time = escape_time

    @property
    def sample_times(self) -> np.ndarray:
        return self.times[self.sample_index]

    @property
    def sample_states(self) -> np.ndarray:
        return self.states[self.sample_index]

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    def to_trajectory(self, id=0) -> Trajectory:
        return Trajectory(id, self.times, self.states, self.held_controls,
                          escaped=self.escaped, escape_time=self.escape_time)

    def to_frame(self) -> pd.DataFrame:
        '''
            One row per dense point: t, x1..xn, u1..um[, V, Valpha],
            is_sample. u is the control held on the interval starting at the
            row (the last held control on the final row); V and Valpha are
            filled on sample rows only.
        '''

        n = self.states.shape[1]
        m = self.held_controls.shape[1]
        interval = np.searchsorted(self.sample_index, np.arange(
            self.times.size), side='right') - 1
        interval = np.clip(interval, 0, max(len(self.held_controls) - 1, 0))
        cols = {'t': self.times}
        for i in range(n):
            cols['x%d' % (i + 1)] = self.states[:, i]
        for j in range(m):
            cols['u%d' % (j + 1)] = (self.held_controls[interval, j]
                                     if len(self.held_controls)
                                     else np.zeros(self.times.size))
        for name in ('V', 'Valpha'):
            vals = getattr(self, name)
            if vals is not None:
                col = np.full(self.times.size, np.nan)
                col[self.sample_index[:vals.size]] = vals
                cols[name] = col
        flag = np.zeros(self.times.size, dtype=int)
        flag[self.sample_index] = 1
        cols['is_sample'] = flag
        return pd.DataFrame(cols)


def write_trajectory_csv(traj: PiTrajectory, path: str = None):
    return write_csv(traj.to_frame(), path)


def rk4_step(rhs, t: float, x: np.ndarray, dt: float, k1: np.ndarray):
    k2 = rhs(t + dt / 2, x + dt / 2 * k1)
    k3 = rhs(t + dt / 2, x + dt / 2 * k2)
    k4 = rhs(t + dt, x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def escaped_state(x: np.ndarray, bound: float) -> bool:
    return not np.all(np.isfinite(x)) or np.linalg.norm(x) > bound


def simulate_pi_trajectory(sys: ControlSystem, k: FeedbackLaw,
                           schedule: SamplingSchedule, x0,
                           pert: PerturbationSpec = None,
                           substeps: int = None, blowup: float = None,
                           clf=None, envelope: MoreauEnvelope = None
                           ) -> PiTrajectory:
    '''
        Integrates x' = f(x, k(x(t_i) + e(t_i))) + d(t) on each interval of
        the schedule by RK4 with substeps steps, chaining endpoints.

        Raises NonFiniteState if the dynamics return NaN or infinity at a
        reached state.
    '''

    substeps = SUBSTEPS if substeps is None else int(substeps)
    blowup = BLOWUP_BOUND if blowup is None else float(blowup)
    if substeps < 4:
        raise InvalidParams('at least 4 RK4 substeps per interval are needed')
    pert = pert or PerturbationSpec(sys.n)
    if pert.e.dim != sys.n:
        raise DimensionMismatch('perturbation dimension %d, expected %d'
                                % (pert.e.dim, sys.n))
    x = as_vector(x0, sys.n, 'initial state').copy()
    f = sys.f
    d = pert.d
    zero_d = d.kind == 'zero'

    times, states, controls, index, errors = [0.0], [x.copy()], [], [0], []
    V, Valpha = [], []
    escaped, escape_time = False, None
    sample_times = schedule.times

    for i in range(sample_times.size - 1):
        t0, t1 = sample_times[i], sample_times[i + 1]
        e = pert.e(t0, x)
        errors.append(e)
        if clf is not None:
            V.append(float(np.asarray(clf.V(x))))
        if envelope is not None:
            Valpha.append(inf_convolve(envelope, x)[0])
        u = np.asarray(k(x + e), float).reshape(sys.m)
        controls.append(u)

        def rhs(t, y):
            dy = np.asarray(f(y, u), float).reshape(sys.n)
            return dy if zero_d else dy + d(t, y)

        dt = (t1 - t0) / substeps
        for s in range(substeps):
            t = t0 + s * dt
            k1 = rhs(t, x)
            if not np.all(np.isfinite(k1)):
                raise NonFiniteState('%s: non-finite dynamics at t=%g, x=%s'
                                     % (sys.name, t, x.tolist()), t=t, x=x)
            with np.errstate(over='ignore', invalid='ignore'):
                nxt = rk4_step(rhs, t, x, dt, k1)
            t_next = t1 if s == substeps - 1 else t0 + (s + 1) * dt
            if escaped_state(nxt, blowup):
                escaped, escape_time = True, float(t_next)
                break
            x = nxt
            times.append(float(t_next))
            states.append(x.copy())
        if escaped:
            break
        index.append(len(times) - 1)

    if escaped:
        info('sampling_sim: %s escaped at t=%g', sys.name, escape_time)
    elif clf is not None or envelope is not None:
        # diagnostics at the final sample
        if clf is not None:
            V.append(float(np.asarray(clf.V(x))))
        if envelope is not None:
            Valpha.append(inf_convolve(envelope, x)[0])
    return PiTrajectory(schedule, times, states,
                        np.array(controls).reshape(-1, sys.m), index,
                        np.array(errors).reshape(-1, sys.n),
                        V if clf is not None else None,
                        Valpha if envelope is not None else None,
                        escaped, escape_time)


def simulate_pi_batch(sys: ControlSystem, k: FeedbackLaw,
                      schedule: SamplingSchedule, X0, perts: list = None,
                      substeps: int = None, blowup: float = None,
                      envelope: MoreauEnvelope = None) -> list:
    '''
        simulate_pi_trajectory for every row of X0 on one shared schedule,
        perts holding one PerturbationSpec per row (none: unperturbed). The
        rows advance together and a row that escapes stops alone.

        Returns one PiTrajectory per row.
    '''

    substeps = SUBSTEPS if substeps is None else int(substeps)
    blowup = BLOWUP_BOUND if blowup is None else float(blowup)
    if substeps < 4:
        raise InvalidParams('at least 4 RK4 substeps per interval are needed')
    X = np.atleast_2d(np.asarray(X0, float)).copy()
    N, n = X.shape
    if n != sys.n:
        raise DimensionMismatch('initial states have dimension %d, '
                                'expected %d' % (n, sys.n))
    perts = perts or [PerturbationSpec(sys.n)] * N
    if len(perts) != N:
        raise InvalidParams('%d perturbations for %d initial states'
                            % (len(perts), N))
    for pert in perts:
        if pert.e.dim != sys.n:
            raise DimensionMismatch('perturbation dimension %d, expected %d'
                                    % (pert.e.dim, sys.n))
    zero_e = all(p.e.kind == 'zero' for p in perts)
    zero_d = all(p.d.kind == 'zero' for p in perts)

    sample_times = schedule.times
    S = sample_times.size - 1
    times = np.zeros(S * substeps + 1)
    states = np.zeros((times.size, N, n))
    states[0] = X
    controls = np.zeros((S, N, sys.m))
    errors = np.zeros((S, N, n))
    Valpha = np.full((S + 1, N), np.nan) if envelope is not None else None
    length = np.ones(N, dtype=int)
    done = np.zeros(N, dtype=int)
    escape_time = [None] * N
    rows = np.arange(N)

    for i in range(S):
        if not rows.size:
            break
        t0, t1 = sample_times[i], sample_times[i + 1]
        Xa = X[rows]
        E = (np.zeros_like(Xa) if zero_e else
             np.array([perts[r].e(t0, X[r]) for r in rows]).reshape(-1, n))
        errors[i, rows] = E
        if envelope is not None:
            Valpha[i, rows] = inf_convolve_batch(envelope, Xa)[0]
        U = k.rows(Xa + E)
        controls[i, rows] = U

        def rhs(t, Y):
            dY = sys.eval_batch(Y, U)
            if zero_d:
                return dY
            return dY + np.array([perts[r].d(t, y)
                                  for r, y in zip(rows, Y)])

        dt = (t1 - t0) / substeps
        Y = Xa
        for s in range(substeps):
            t = t0 + s * dt
            k1 = rhs(t, Y)
            bad = np.flatnonzero(~np.all(np.isfinite(k1), axis=1))
            if bad.size:
                x = Y[bad[0]]
                raise NonFiniteState('%s: non-finite dynamics at t=%g, x=%s'
                                     % (sys.name, t, x.tolist()), t=t, x=x)
            with np.errstate(over='ignore', invalid='ignore'):
                nxt = rk4_step(rhs, t, Y, dt, k1)
                out = ~np.all(np.isfinite(nxt), axis=1) | (
                    np.linalg.norm(nxt, axis=1) > blowup)
            t_next = t1 if s == substeps - 1 else t0 + (s + 1) * dt
            for r in rows[out]:
                escape_time[r] = float(t_next)
            if np.any(out):
                keep = ~out
                rows, U, Y = rows[keep], U[keep], nxt[keep]
            else:
                Y = nxt
            j = i * substeps + s + 1
            times[j] = t_next
            states[j, rows] = Y
            length[rows] = j + 1
            if not rows.size:
                break
        X[rows] = Y
        done[rows] = i + 1

    if envelope is not None and rows.size:
        Valpha[S, rows] = inf_convolve_batch(envelope, X[rows])[0]
    out = []
    for r in range(N):
        escaped = escape_time[r] is not None
        started = done[r] + (1 if escaped else 0)
        if escaped:
            info('sampling_sim: %s escaped at t=%g', sys.name,
                 escape_time[r])
        out.append(PiTrajectory(
            schedule, times[:length[r]].copy(),
            states[:length[r], r].copy(), controls[:started, r],
            substeps * np.arange(done[r] + 1), errors[:started, r], None,
            None if Valpha is None else
            Valpha[:started if escaped else S + 1, r],
            escaped, escape_time[r]))
    return out


def simulate_classical(sys: ControlSystem, k: FeedbackLaw, x0, t_end: float,
                       step: float = None, blowup: float = None
                       ) -> Trajectory:
    '''
        Fixed-step RK4 solution of x' = f(x, k(x)).

        Raises RefusedDiscontinuous for discontinuous feedback, whose
        classical closed loop is undefined; use pi-trajectories instead.
    '''

    if k.continuity_class == DISCONTINUOUS:
        raise RefusedDiscontinuous('%s feedback is discontinuous; simulate '
                                   'pi-trajectories instead' % k.provenance)
    step = CLASSICAL_STEP if step is None else float(step)
    blowup = BLOWUP_BOUND if blowup is None else float(blowup)
    if not step > 0 or not t_end > 0:
        raise InvalidParams('step and horizon must be positive')
    count = max(1, ceil(t_end / step - 1e-12))
    dt = t_end / count
    x = as_vector(x0, sys.n, 'initial state').copy()
    f = sys.f

    def rhs(t, y):
        return np.asarray(f(y, k(y)), float).reshape(sys.n)

    times, states, controls = [0.0], [x.copy()], []
    escaped, escape_time = False, None
    for i in range(count):
        t = i * dt
        controls.append(k(x))
        k1 = rhs(t, x)
        if not np.all(np.isfinite(k1)):
            raise NonFiniteState('%s: non-finite dynamics at t=%g, x=%s'
                                 % (sys.name, t, x.tolist()), t=t, x=x)
        with np.errstate(over='ignore', invalid='ignore'):
            nxt = rk4_step(rhs, t, x, dt, k1)
        t_next = t_end if i == count - 1 else (i + 1) * dt
        if escaped_state(nxt, blowup):
            escaped, escape_time = True, float(t_next)
            controls.pop()
            break
        x = nxt
        times.append(t_next)
        states.append(x.copy())
    return Trajectory(0, times, states,
                      np.array(controls).reshape(-1, sys.m),
                      escaped=escaped, escape_time=escape_time)


# ==============
#     SIZING
# ==============


class SizingConstants(Model):
    '''
        Constants of the sampled stabilization argument.

        Attributes:
        -----------
        r, R: Target and working radii.

        alpha: Envelope scale (None for smooth targets).

        gamma_r, gamma_R: Smallest W on r <= |x| <= R and on
        R <= |x| <= 1.5 R.

        c: Lipschitz constant of the (regularized) CLF on B_R.

        m: sup |f| on B_R x U0.

        delta_rate: Guaranteed decrease rate, fraction * gamma(r) / 2.

        kappa: delta_rate / (2 c).

        delta_hi, delta_lo: Admissible band of sampling gaps.

        eps_bound: Admissible measurement error, kappa * delta_lo.

        t_bound: Horizon after which x stays in B_r, T_FACTOR gamma(R) /
        delta_rate.

        lipschitz_mode: 'empirical', 'formula' or 'gradient'.

        overridden: Names of the constants given explicitly.
    '''

    FIELDS = ('c', 'm', 'delta_rate', 'kappa', 'delta_hi', 'delta_lo',
              'eps_bound', 't_bound')

    def __init__(self, r: float, R: float, alpha: float, gamma_r: float,
                 gamma_R: float, c: float, m: float, delta_rate: float,
                 kappa: float, delta_hi: float, delta_lo: float,
                 eps_bound: float, t_bound: float,
                 lipschitz_mode: str = 'empirical', overridden: list = None):
        self.r = float(r)
        self.R = float(R)
        self.alpha = None if alpha is None else float(alpha)
        self.gamma_r = float(gamma_r)
        self.gamma_R = float(gamma_R)
        self.c = float(c)
        self.m = float(m)
        self.delta_rate = float(delta_rate)
        self.kappa = float(kappa)
        self.delta_hi = float(delta_hi)
        self.delta_lo = float(delta_lo)
        self.eps_bound = float(eps_bound)
        self.t_bound = float(t_bound)
        self.lipschitz_mode = lipschitz_mode
        self.overridden = sorted(overridden or [])

    def band_contains(self, lower_diameter: float, diameter: float) -> bool:
        tol = 1e-9 * self.delta_hi
        return (lower_diameter >= self.delta_lo - tol
                and diameter <= self.delta_hi + tol)


def default_envelope(base: ContinuousCLF, r: float) -> MoreauEnvelope:
    '''
        Envelope with alpha = SIZING:ALPHA_FACTOR * r.
    '''

    return MoreauEnvelope(base, ALPHA_FACTOR * r)


def _ball_grid(n: int, R: float, resolution: int) -> np.ndarray:
    axis = np.linspace(-R, R, resolution)
    mesh = np.meshgrid(*([axis] * n), indexing='ij')
    pts = np.stack([a.reshape(-1) for a in mesh], axis=-1)
    return pts[np.linalg.norm(pts, axis=1) <= R * (1 + 1e-12)]


def _sup_dynamics(sys: ControlSystem, U0: ControlSet, pts: np.ndarray
                  ) -> float:
    grid = U0.grid()
    if grid.shape[0] > 2000:
        grid = grid[np.linspace(0, grid.shape[0] - 1, 2000).astype(int)]
    best = 0.0
    for x in pts:
        vals = sys.eval_batch(x[None, :], grid)
        best = max(best, float(np.linalg.norm(vals, axis=1).max()))
    return best


def constants_for(target, sys: ControlSystem, r: float, R: float,
                  U0: ControlSet = None, fraction: float = None,
                  lipschitz: str = None, resolution: int = 21,
                  **overrides) -> SizingConstants:
    '''
        Sizing constants for a MoreauEnvelope (or a CLF with gradient) on
        sys. Any constant of SizingConstants.FIELDS can be given explicitly;
        the ones derived from it follow.

        Raises PreconditionFailed unless 2 gamma(r) < gamma(R).
    '''

    unknown = set(overrides) - set(SizingConstants.FIELDS)
    if unknown:
        raise InvalidParams('unknown sizing constant(s) %s'
                            % ', '.join(sorted(unknown)))
    if not 0 < r < R:
        raise InvalidParams('sizing needs 0 < r < R')
    fraction = DECREASE_FRACTION if fraction is None else fraction
    lipschitz = lipschitz or LIPSCHITZ
    U0 = U0 or sys.control_set
    envelope = target if isinstance(target, MoreauEnvelope) else None
    base = envelope.base if envelope else target
    if getattr(base, 'W', None) is None:
        raise InvalidParams('sizing needs a CLF with a decrease rate W')

    g_r = gamma(base, r, R)
    g_R = gamma(base, R, 1.5 * R)
    if 2 * g_r >= g_R * (1 - 1e-12):
        raise PreconditionFailed('2 gamma(r) = %.6g is not below gamma(R) = '
                                 '%.6g' % (2 * g_r, g_R), gamma_r=g_r,
                                 gamma_R=g_R)

    pts = _ball_grid(sys.n, R, resolution)
    values = dict(overrides)
    if 'c' not in values:
        if envelope is None:
            values['c'] = 1.1 * max(np.linalg.norm(base.grad(x))
                                    for x in pts)
            lipschitz = 'gradient'
        elif lipschitz == 'formula':
            sup_v = float(base.values(pts).max()) if hasattr(
                base, 'values') else max(float(base.V(x)) for x in pts)
            values['c'] = (np.sqrt(2 * sup_v) / envelope.alpha
                           + R / envelope.alpha ** 2)
        else:
            values['c'] = 1.1 * float(np.linalg.norm(
                proximal_aims(envelope, pts), axis=1).max())
    if 'm' not in values:
        values['m'] = _sup_dynamics(sys, U0, pts)
    values.setdefault('delta_rate', fraction * g_r / 2)
    values.setdefault('kappa', values['delta_rate'] / (2 * values['c']))
    values.setdefault('delta_hi', SAMPLING_FACTOR * g_r
                      / (values['c'] * values['m']))
    values.setdefault('delta_lo', BAND_RATIO * values['delta_hi'])
    values.setdefault('eps_bound', values['kappa'] * values['delta_lo'])
    values.setdefault('t_bound', T_FACTOR * g_R / values['delta_rate'])
    for name in SizingConstants.FIELDS:
        if not (values[name] > 0 and np.isfinite(values[name])):
            raise InvalidParams('sizing constant %s = %r is not positive'
                                % (name, values[name]))
    if values['delta_lo'] > values['delta_hi']:
        raise InvalidParams('delta_lo exceeds delta_hi')
    constants = SizingConstants(
        r, R, envelope.alpha if envelope else None, g_r, g_R,
        lipschitz_mode=lipschitz, overridden=list(overrides), **values)
    info('sampling_sim: sizing r=%g R=%g c=%.6g delta=[%.6g, %.6g] '
         'eps=%.6g T=%.6g', r, R, constants.c, constants.delta_lo,
         constants.delta_hi, constants.eps_bound, constants.t_bound)
    return constants


# ==================
#     EXPERIMENT
# ==================


class ExperimentReport(Model):
    '''
        Robust-stabilization experiment result.

        Attributes:
        -----------
        constants: SizingConstants used.

        t_end: Simulated horizon, max(2 T_bound, requested).

        rows: One row per (x0, schedule, perturbation) cell, in cell order.

        summary: Counts of passing, failing and compliant cells.
    '''

    def __init__(self, constants: SizingConstants, t_end: float,
                 rows: list, summary: dict = None):
        self.constants = constants
        self.t_end = float(t_end)
        self.rows = list(rows)
        self.summary = summary if summary is not None else summarize(rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows)
        for col in ('x0',):
            if col in frame:
                frame[col] = frame[col].map(
                    lambda v: ','.join('%.17g' % c for c in v))
        return frame

    @classmethod
    def from_dict(cls, d: dict):
        return cls(SizingConstants.from_dict(d['constants']), d['t_end'],
                   d['rows'], d.get('summary'))


def summarize(rows: list) -> dict:
    attributions = {}
    for row in rows:
        if row['attribution']:
            attributions[row['attribution']] = attributions.get(
                row['attribution'], 0) + 1
    entry = [row['entry_time'] for row in rows
             if row['entry_time'] is not None]
    return {'cells': len(rows),
            'passed': sum(1 for row in rows if row['passed']),
            'failed': sum(1 for row in rows if not row['passed']),
            'compliant': sum(1 for row in rows if row['compliant']),
            'compliant_failed': sum(1 for row in rows
                                    if row['compliant']
                                    and not row['passed']),
            'attributions': attributions,
            'max_entry_time': max(entry) if entry else None}


def initial_states(n: int, radius: float, count: int = 16, seed: int = 0
                   ) -> np.ndarray:
    '''
        count states on the sphere |x| = radius (evenly spaced for n <= 2).
    '''

    if n == 1:
        return radius * np.array([[1.0], [-1.0]])
    if n == 2:
        th = 2 * np.pi * np.arange(count) / count
        return radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
    dirs = np.random.default_rng(seed).normal(size=(count, n))
    return radius * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def band_schedule(constants: SizingConstants, factor: float = None
                  ) -> ScheduleSpec:
    '''
        Uniform schedule in the middle of the band (factor None) or with
        period factor * delta_hi.
    '''

    if factor is None:
        return ScheduleSpec('uniform', (constants.delta_lo
                                        + constants.delta_hi) / 2)
    return ScheduleSpec('uniform', factor * constants.delta_hi)


def _cell_row(constants, cell, x0, spec, pert, traj):
    schedule = traj.schedule
    norms = traj.norms()
    r, R = constants.r, constants.R
    contained = (not traj.escaped) and bool(np.all(
        norms <= R * (1 + CHECK_TOL) + CHECK_TOL))
    late = traj.times >= constants.t_bound
    entered = (not traj.escaped) and traj.times[-1] >= constants.t_bound \
        and bool(np.all(norms[late] <= r * (1 + CHECK_TOL) + CHECK_TOL))
    outside = np.flatnonzero(norms > r * (1 + CHECK_TOL) + CHECK_TOL)
    if traj.escaped or (outside.size and outside[-1] == norms.size - 1):
        entry_time = None
    else:
        entry_time = (float(traj.times[outside[-1] + 1]) if outside.size
                      else 0.0)

    # sample-decrease certificate outside B_r
    va = traj.Valpha
    st = traj.sample_times
    k = max(min(va.size, st.size) - 1, 0)
    outside_r = np.linalg.norm(traj.sample_states[:k], axis=1) > r
    drop = va[:k] - constants.delta_rate * np.diff(st[:k + 1])
    violations = int(np.sum(outside_r & (
        va[1:k + 1] > drop + CHECK_TOL * (1 + np.abs(va[:k])))))

    band_ok = constants.band_contains(schedule.lower_diameter,
                                      schedule.diameter)
    error_ok = (pert.eps_bar <= constants.eps_bound * (1 + CHECK_TOL)
                and pert.d_bar <= constants.eps_bound * (1 + CHECK_TOL))
    passed = contained and entered
    attribution = None
    if not passed:
        attribution = ('band' if not band_ok else
                       'error-bound' if not error_ok else 'counterexample')
    return {'cell': cell, 'x0': np.asarray(x0, float).tolist(),
            'schedule': str(spec), 'd_pi': schedule.diameter,
            'delta_pi': schedule.lower_diameter,
            'eps_bar': pert.eps_bar, 'd_bar': pert.d_bar,
            'perturbation': '%s/%s' % (pert.e.kind, pert.d.kind),
            'containment': contained, 'entry': entered,
            'entry_time': entry_time, 'max_norm': float(norms.max()),
            'final_norm': float(norms[-1]), 'escaped': traj.escaped,
            'decrease_violations': violations, 'band_ok': band_ok,
            'error_ok': error_ok, 'compliant': band_ok and error_ok,
            'passed': passed, 'attribution': attribution}


def robust_stabilization_experiment(sys: ControlSystem, env: MoreauEnvelope,
                                    U0: ControlSet, r: float, R: float,
                                    schedules: list = None,
                                    perturbations: list = None,
                                    x0s=None, constants: SizingConstants = None,
                                    t_end: float = None,
                                    substeps: int = None, threads: int = None,
                                    **overrides) -> ExperimentReport:
    '''
        Runs pi-trajectories of the proximal feedback for every (x0,
        schedule, perturbation) cell and checks containment in B_R and
        entry into B_r after T_bound. Failing cells are attributed to the
        schedule band, the error bound, or neither (counterexample).
    '''

    U0 = U0 or sys.control_set
    constants = constants or constants_for(env, sys, r, R, U0, **overrides)
    schedules = schedules or [band_schedule(constants)]
    perturbations = perturbations or [PerturbationSpec(sys.n)]
    x0s = initial_states(sys.n, R / 2) if x0s is None else np.atleast_2d(
        np.asarray(x0s, float))
    horizon = max(2 * constants.t_bound, t_end or 0.0)
    law = proximal_feedback(env, sys, U0)
    cells = []
    for x0 in x0s:
        for s, spec in enumerate(schedules):
            for pert in perturbations:
                cells.append((len(cells), s, x0, spec, pert))
    info('sampling_sim: robust experiment on %s, %d cells, horizon %g',
         sys.name, len(cells), horizon)
    env.clear()

    # cells sharing a schedule are simulated as one batch
    def run(s):
        group = [c for c in cells if c[1] == s]
        trajs = simulate_pi_batch(
            sys, law, schedules[s].build(horizon), [c[2] for c in group],
            [c[4] for c in group], substeps, envelope=env)
        return [_cell_row(constants, c[0], c[2], c[3], c[4], traj)
                for c, traj in zip(group, trajs)]

    groups = parallel_map(run, range(len(schedules)), threads)
    rows = sorted((row for group in groups for row in group),
                  key=lambda row: row['cell'])
    env.clear()
    return ExperimentReport(constants, horizon, rows)
