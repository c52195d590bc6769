"""Pure-Python reference kernels for the hot simulation loops.

These are the semantics of record.  The compiled extension
(`spikevar._ckernels`) mirrors every floating-point operation here in the
same order, uses the same libm calls and the same splitmix64 draws, so both
backends produce bit-identical results for identical arguments.  Keep the
two files in lockstep: any change here must be replicated there.

Shared conventions:
  * threshold tests use a 1e-12 relative slack (see spikevar.neuron),
  * simultaneous synaptic impulses are summed before one threshold test,
  * stochastic clocked neurons draw one uniform per cycle, and only on
    cycles where their potential changed,
  * per-cell / per-probe seeds come from rng.derive_seed, which makes grid
    and episode work schedule-independent.
"""

from __future__ import annotations

import math

import numpy as np

from ..rng import Stream, derive_seed

NAME = "python"

_RTOL = 1e-12  # keep equal to neuron.THRESHOLD_RTOL
_TWO_PI = 6.283185307179586

# Layout of the packed environment-parameter vector handed to `episode`.
ENV_DT = 0
ENV_FORCE_MAG = 1
ENV_THETA_LIMIT = 2
ENV_X_LIMIT = 3
ENV_XDOT_LIMIT = 4
ENV_THETADOT_LIMIT = 5
ENV_JITTER = 6
ENV_GRAVITY = 7
ENV_CART_MASS = 8
ENV_POLE_MASS = 9
ENV_HALF_LENGTH = 10
ENV_TIE_DEFAULT = 11
ENV_INIT_X = 12
ENV_INIT_XDOT = 13
ENV_INIT_THETA = 14
ENV_INIT_THETADOT = 15
ENV_SIZE = 16


def _aslist(a):
    """Native-Python copy of an array (numpy scalars are slow in tight loops)."""
    return a.tolist() if hasattr(a, "tolist") else list(a)


def sde_trace(threshold, leak, sigma, ev_t, ev_w, sample_t, seed):
    """Integrate one neuron's SDE with jumps; record voltage at sample times.

    Returns (voltages at sample_t, spike times).  ``ev_t`` must be sorted
    ascending and lie within [0, sample_t[-1]]; ``sample_t`` starts at 0.
    """
    ev_t = _aslist(ev_t)
    ev_w = _aslist(ev_w)
    sample_t = _aslist(sample_t)
    n_ev = len(ev_t)
    n_s = len(sample_t)
    volts = np.empty(n_s, dtype=np.float64)
    spikes = []

    stream = Stream(seed)
    thr_eff = threshold * (1.0 - _RTOL)
    v = 0.0
    t = 0.0
    i_e = 0
    i_s = 0
    while i_s < n_s or i_e < n_ev:
        if i_e < n_ev and (i_s >= n_s or ev_t[i_e] <= sample_t[i_s]):
            tb = ev_t[i_e]
            is_event = True
        else:
            tb = sample_t[i_s]
            is_event = False
        h = tb - t
        if h > 0.0:
            v = v + (-leak * v) * h
            if sigma > 0.0:
                u1 = stream.uniform()
                u2 = stream.uniform()
                z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(_TWO_PI * u2)
                dw = math.sqrt(h) * z
                # additive noise: the Milstein correction 0.5*b*db/dv*(dw*dw-h)
                # vanishes because db/dv = 0
                v = v + sigma * dw
            if v >= thr_eff:
                spikes.append(tb)
                v = 0.0
        if is_event:
            jump = 0.0
            while i_e < n_ev and ev_t[i_e] == tb:
                jump += ev_w[i_e]
                i_e += 1
            v = v + jump
            if v >= thr_eff:
                spikes.append(tb)
                v = 0.0
        while i_s < n_s and sample_t[i_s] == tb:
            volts[i_s] = v
            i_s += 1
        t = tb
    return volts, np.asarray(spikes, dtype=np.float64)


def _det_probe_fired(thr_eff, leak, ev_t, ev_syn, lo, hi, w1, w2):
    """Deterministic (sigma = 0) event-driven run; True once the neuron fires."""
    v = 0.0
    tprev = 0.0
    i = lo
    while i < hi:
        tb = ev_t[i]
        if leak > 0.0 and v != 0.0:
            v = v * math.exp(-leak * (tb - tprev))
        jump = 0.0
        while i < hi and ev_t[i] == tb:
            jump += w1 if ev_syn[i] == 0 else w2
            i += 1
        v = v + jump
        if v >= thr_eff:
            return True
        tprev = tb
    return False


def _sde_probe_fired(thr_eff, leak, sigma, ev_t, ev_syn, lo, hi,
                     w1, w2, dt, window, seed):
    """Stochastic run of one probe; True once the neuron fires."""
    stream = Stream(seed)
    v = 0.0
    t = 0.0
    i = lo
    while t < window:
        tn = t + dt
        if tn > window:
            tn = window
        if i < hi and ev_t[i] < tn:
            tn = ev_t[i]
        h = tn - t
        if h > 0.0:
            v = v + (-leak * v) * h
            u1 = stream.uniform()
            u2 = stream.uniform()
            z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(_TWO_PI * u2)
            v = v + sigma * (math.sqrt(h) * z)
            if v >= thr_eff:
                return True
        jump = 0.0
        while i < hi and ev_t[i] == tn:
            jump += w1 if ev_syn[i] == 0 else w2
            i += 1
        if jump != 0.0:
            v = v + jump
            if v >= thr_eff:
                return True
        t = tn
    return False


def probe_map(threshold, leak, sigma, axis, probe_off, probe_t, probe_syn,
              dt, window, seed):
    """Fire/no-fire response of a two-synapse neuron over a weight grid.

    Returns a uint8 array of shape (len(axis), len(axis), n_probes) where
    entry [i, j, p] is 1 if the neuron with weights (axis[i], axis[j]) fired
    on probe p.  Noisy cells run one stochastic trial each, seeded by
    derive_seed(seed, i, j, p).
    """
    axis = _aslist(axis)
    probe_off = _aslist(probe_off)
    probe_t = _aslist(probe_t)
    probe_syn = _aslist(probe_syn)
    n_w = len(axis)
    n_p = len(probe_off) - 1
    out = np.zeros((n_w, n_w, n_p), dtype=np.uint8)
    thr_eff = threshold * (1.0 - _RTOL)
    for i in range(n_w):
        w1 = axis[i]
        for j in range(n_w):
            w2 = axis[j]
            for p in range(n_p):
                lo = probe_off[p]
                hi = probe_off[p + 1]
                if sigma == 0.0:
                    fired = _det_probe_fired(
                        thr_eff, leak, probe_t, probe_syn, lo, hi, w1, w2)
                else:
                    fired = _sde_probe_fired(
                        thr_eff, leak, sigma, probe_t, probe_syn, lo, hi,
                        w1, w2, dt, window, derive_seed(seed, i, j, p))
                if fired:
                    out[i, j, p] = 1
    return out


def episode(thresholds, decay, sigma_a,
            src_off, syn_post, syn_w, syn_delay,
            n_inputs, out_left, out_right, max_delay,
            enc_ports, n_bins,
            env, max_cycles, sub_cycles, seed, record=None):
    """Closed-loop cart-pole episode driven by a clocked spiking network.

    Returns (fitness, rows_recorded).  Fitness is the number of completed
    decision cycles whose post-step state stayed within the failure limits,
    capped at ``max_cycles``.  When ``record`` (float64 array of shape
    (max_cycles, 6)) is given, each decision writes
    [cycle, x, x_dot, theta, theta_dot, action] before the physics step.
    """
    thrs = _aslist(thresholds)
    thr_eff = [tv * (1.0 - _RTOL) for tv in thrs]
    src_off = _aslist(src_off)
    syn_post = _aslist(syn_post)
    syn_w = _aslist(syn_w)
    syn_delay = _aslist(syn_delay)
    enc_ports = _aslist(enc_ports)
    env = _aslist(env)
    n = len(thrs)
    rows = max_delay + 1
    buf = [[0.0] * n for _ in range(rows)]
    volt = [0.0] * n

    dt = env[ENV_DT]
    force_mag = env[ENV_FORCE_MAG]
    theta_limit = env[ENV_THETA_LIMIT]
    x_limit = env[ENV_X_LIMIT]
    xdot_limit = env[ENV_XDOT_LIMIT]
    thetadot_limit = env[ENV_THETADOT_LIMIT]
    jitter = env[ENV_JITTER]
    gravity = env[ENV_GRAVITY]
    cart_mass = env[ENV_CART_MASS]
    pole_mass = env[ENV_POLE_MASS]
    half_length = env[ENV_HALF_LENGTH]
    tie_default = int(env[ENV_TIE_DEFAULT])

    total_mass = cart_mass + pole_mass
    pml = pole_mass * half_length
    leaky = decay != 1.0
    noisy = sigma_a != 0.0
    sig2 = sigma_a * sigma_a

    stream = Stream(seed)
    x = env[ENV_INIT_X] + stream.uniform_signed() * (jitter * x_limit)
    xdot = env[ENV_INIT_XDOT] + stream.uniform_signed() * (jitter * xdot_limit)
    theta = env[ENV_INIT_THETA] + stream.uniform_signed() * (jitter * theta_limit)
    thetadot = env[ENV_INIT_THETADOT] + stream.uniform_signed() * (jitter * thetadot_limit)

    prev_action = tie_default
    fitness = 0
    recorded = 0
    cycle = 0
    for step_i in range(max_cycles):
        votes_l = 0
        votes_r = 0
        for sub in range(sub_cycles):
            row = cycle % rows
            if sub == 0:
                for vi in range(4):
                    if vi == 0:
                        nrm = x / x_limit
                    elif vi == 1:
                        nrm = xdot / xdot_limit
                    elif vi == 2:
                        nrm = theta / theta_limit
                    else:
                        nrm = thetadot / thetadot_limit
                    if nrm > 1.0:
                        nrm = 1.0
                    elif nrm < -1.0:
                        nrm = -1.0
                    b = int((nrm + 1.0) * 0.5 * n_bins)
                    if b >= n_bins:
                        b = n_bins - 1
                    src = enc_ports[vi * n_bins + b]
                    if src >= 0:
                        for si in range(src_off[src], src_off[src + 1]):
                            buf[(cycle + syn_delay[si]) % rows][syn_post[si]] += syn_w[si]
            arrivals = buf[row]
            for i in range(n):
                charge = arrivals[i]
                v0 = volt[i]
                v = v0 * decay if leaky else v0
                v = v + charge
                if not noisy:
                    fired = v >= thr_eff[i]
                else:
                    fired = False
                    if charge != 0.0 or (leaky and v0 != 0.0):
                        u = stream.uniform()
                        if v >= thrs[i]:
                            p = 1.0
                        else:
                            p = math.exp(-(thrs[i] - v) / (thrs[i] * sig2))
                        fired = u < p
                if fired:
                    volt[i] = 0.0
                    if i == out_left:
                        votes_l += 1
                    if i == out_right:
                        votes_r += 1
                    src = n_inputs + i
                    for si in range(src_off[src], src_off[src + 1]):
                        buf[(cycle + syn_delay[si]) % rows][syn_post[si]] += syn_w[si]
                else:
                    volt[i] = v
            for i in range(n):
                arrivals[i] = 0.0
            cycle += 1
        if votes_r > votes_l:
            action = 1
        elif votes_l > votes_r:
            action = -1
        else:
            action = prev_action
        prev_action = action
        if record is not None:
            record[recorded, 0] = step_i
            record[recorded, 1] = x
            record[recorded, 2] = xdot
            record[recorded, 3] = theta
            record[recorded, 4] = thetadot
            record[recorded, 5] = action
            recorded += 1
        force = action * force_mag
        costheta = math.cos(theta)
        sintheta = math.sin(theta)
        tmp = (force + pml * thetadot * thetadot * sintheta) / total_mass
        thetaacc = (gravity * sintheta - costheta * tmp) / (
            half_length * (4.0 / 3.0 - pole_mass * costheta * costheta / total_mass))
        xacc = tmp - pml * thetaacc * costheta / total_mass
        xdot = xdot + dt * xacc
        x = x + dt * xdot
        thetadot = thetadot + dt * thetaacc
        theta = theta + dt * thetadot
        if theta > theta_limit or theta < -theta_limit or x > x_limit or x < -x_limit:
            break
        fitness += 1
    return fitness, recorded
