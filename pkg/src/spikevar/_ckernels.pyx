# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirrors of spikevar.backends.pykernels.

Every floating-point expression here replicates the pure-Python reference in
the same evaluation order against the same libm, and the splitmix64 draws
are identical, so the two backends return bit-identical results.  The build
disables FP contraction (-ffp-contract=off) to keep it that way.  Any change
to pykernels.py must be replicated here.
"""

from libc.math cimport cos, exp, log, sin, sqrt
from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

import numpy as np

NAME = "compiled"

cdef double _RTOL = 1e-12
cdef double _TWO_PI = 6.283185307179586
cdef double _U53 = 1.0 / 9007199254740992.0

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15
cdef uint64_t _MIX1 = 0xBF58476D1CE4E5B9
cdef uint64_t _MIX2 = 0x94D049BB133111EB
cdef uint64_t _FOLD = 0xFF51AFD7ED558CCD

# Layout of the packed environment vector; keep equal to pykernels.
cdef enum:
    ENV_DT
    ENV_FORCE_MAG
    ENV_THETA_LIMIT
    ENV_X_LIMIT
    ENV_XDOT_LIMIT
    ENV_THETADOT_LIMIT
    ENV_JITTER
    ENV_GRAVITY
    ENV_CART_MASS
    ENV_POLE_MASS
    ENV_HALF_LENGTH
    ENV_TIE_DEFAULT
    ENV_INIT_X
    ENV_INIT_XDOT
    ENV_INIT_THETA
    ENV_INIT_THETADOT


cdef inline uint64_t _mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * _MIX1
    z = (z ^ (z >> 27)) * _MIX2
    return z ^ (z >> 31)


cdef inline uint64_t _next_u64(uint64_t* state) noexcept nogil:
    state[0] = state[0] + _GOLDEN
    return _mix64(state[0])


cdef inline double _uniform(uint64_t* state) noexcept nogil:
    return <double>(_next_u64(state) >> 11) * _U53


cdef inline double _uniform_signed(uint64_t* state) noexcept nogil:
    return 2.0 * _uniform(state) - 1.0


cdef inline double _normal(uint64_t* state) noexcept nogil:
    cdef double u1 = _uniform(state)
    cdef double u2 = _uniform(state)
    return sqrt(-2.0 * log(1.0 - u1)) * cos(_TWO_PI * u2)


cdef inline uint64_t _derive4(uint64_t a, uint64_t b, uint64_t c, uint64_t d) noexcept nogil:
    # mirrors rng.derive_seed(a, b, c, d)
    cdef uint64_t h = _GOLDEN
    h = _mix64(h ^ (a * _FOLD))
    h = _mix64(h ^ (b * _FOLD))
    h = _mix64(h ^ (c * _FOLD))
    h = _mix64(h ^ (d * _FOLD))
    return h


def sde_trace(double threshold, double leak, double sigma,
              double[::1] ev_t, double[::1] ev_w, double[::1] sample_t,
              uint64_t seed):
    """See pykernels.sde_trace."""
    cdef Py_ssize_t n_ev = ev_t.shape[0]
    cdef Py_ssize_t n_s = sample_t.shape[0]
    volts_arr = np.empty(n_s, dtype=np.float64)
    spikes_arr = np.empty(n_s + 2 * n_ev + 8, dtype=np.float64)
    cdef double[::1] volts = volts_arr
    cdef double[::1] spikes = spikes_arr

    cdef uint64_t state = seed
    cdef double thr_eff = threshold * (1.0 - _RTOL)
    cdef double v = 0.0
    cdef double t = 0.0
    cdef double tb, h, z, dw, jump
    cdef Py_ssize_t i_e = 0, i_s = 0, n_spk = 0
    cdef bint is_event

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
                z = _normal(&state)
                dw = sqrt(h) * z
                v = v + sigma * dw
            if v >= thr_eff:
                spikes[n_spk] = tb
                n_spk += 1
                v = 0.0
        if is_event:
            jump = 0.0
            while i_e < n_ev and ev_t[i_e] == tb:
                jump += ev_w[i_e]
                i_e += 1
            v = v + jump
            if v >= thr_eff:
                spikes[n_spk] = tb
                n_spk += 1
                v = 0.0
        while i_s < n_s and sample_t[i_s] == tb:
            volts[i_s] = v
            i_s += 1
        t = tb
    return volts_arr, spikes_arr[:n_spk].copy()


cdef bint _det_probe_fired(double thr_eff, double leak,
                           double[::1] ev_t, int32_t[::1] ev_syn,
                           Py_ssize_t lo, Py_ssize_t hi,
                           double w1, double w2) noexcept nogil:
    cdef double v = 0.0
    cdef double tprev = 0.0
    cdef double tb, jump
    cdef Py_ssize_t i = lo
    while i < hi:
        tb = ev_t[i]
        if leak > 0.0 and v != 0.0:
            v = v * exp(-leak * (tb - tprev))
        jump = 0.0
        while i < hi and ev_t[i] == tb:
            jump += w1 if ev_syn[i] == 0 else w2
            i += 1
        v = v + jump
        if v >= thr_eff:
            return True
        tprev = tb
    return False


cdef bint _sde_probe_fired(double thr_eff, double leak, double sigma,
                           double[::1] ev_t, int32_t[::1] ev_syn,
                           Py_ssize_t lo, Py_ssize_t hi,
                           double w1, double w2,
                           double dt, double window, uint64_t seed) noexcept nogil:
    cdef uint64_t state = seed
    cdef double v = 0.0
    cdef double t = 0.0
    cdef double tn, h, z, jump
    cdef Py_ssize_t i = lo
    while t < window:
        tn = t + dt
        if tn > window:
            tn = window
        if i < hi and ev_t[i] < tn:
            tn = ev_t[i]
        h = tn - t
        if h > 0.0:
            v = v + (-leak * v) * h
            z = _normal(&state)
            v = v + sigma * (sqrt(h) * z)
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


def probe_map(double threshold, double leak, double sigma,
              double[::1] axis, int32_t[::1] probe_off,
              double[::1] probe_t, int32_t[::1] probe_syn,
              double dt, double window, uint64_t seed):
    """See pykernels.probe_map."""
    cdef Py_ssize_t n_w = axis.shape[0]
    cdef Py_ssize_t n_p = probe_off.shape[0] - 1
    out_arr = np.zeros((n_w, n_w, n_p), dtype=np.uint8)
    cdef uint8_t[:, :, ::1] out = out_arr
    cdef double thr_eff = threshold * (1.0 - _RTOL)
    cdef double w1, w2
    cdef Py_ssize_t i, j, p, lo, hi
    cdef bint fired
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
                        w1, w2, dt, window,
                        _derive4(seed, <uint64_t>i, <uint64_t>j, <uint64_t>p))
                if fired:
                    out[i, j, p] = 1
    return out_arr


def episode(double[::1] thresholds, double decay, double sigma_a,
            int32_t[::1] src_off, int32_t[::1] syn_post, double[::1] syn_w,
            int32_t[::1] syn_delay,
            Py_ssize_t n_inputs, Py_ssize_t out_left, Py_ssize_t out_right,
            Py_ssize_t max_delay,
            int32_t[::1] enc_ports, Py_ssize_t n_bins,
            double[::1] env, Py_ssize_t max_cycles, Py_ssize_t sub_cycles,
            uint64_t seed, record=None):
    """See pykernels.episode."""
    cdef Py_ssize_t n = thresholds.shape[0]
    cdef Py_ssize_t rows = max_delay + 1
    buf_arr = np.zeros((rows, n), dtype=np.float64)
    volt_arr = np.zeros(n, dtype=np.float64)
    thr_eff_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] buf = buf_arr
    cdef double[::1] volt = volt_arr
    cdef double[::1] thr_eff = thr_eff_arr
    cdef Py_ssize_t i
    for i in range(n):
        thr_eff[i] = thresholds[i] * (1.0 - _RTOL)

    cdef bint do_record = record is not None
    cdef double[:, ::1] rec
    if do_record:
        rec = record

    cdef double dt = env[ENV_DT]
    cdef double force_mag = env[ENV_FORCE_MAG]
    cdef double theta_limit = env[ENV_THETA_LIMIT]
    cdef double x_limit = env[ENV_X_LIMIT]
    cdef double xdot_limit = env[ENV_XDOT_LIMIT]
    cdef double thetadot_limit = env[ENV_THETADOT_LIMIT]
    cdef double jitter = env[ENV_JITTER]
    cdef double gravity = env[ENV_GRAVITY]
    cdef double cart_mass = env[ENV_CART_MASS]
    cdef double pole_mass = env[ENV_POLE_MASS]
    cdef double half_length = env[ENV_HALF_LENGTH]
    cdef int tie_default = <int>env[ENV_TIE_DEFAULT]

    cdef double total_mass = cart_mass + pole_mass
    cdef double pml = pole_mass * half_length
    cdef bint leaky = decay != 1.0
    cdef bint noisy = sigma_a != 0.0
    cdef double sig2 = sigma_a * sigma_a

    cdef uint64_t state = seed
    cdef double x = env[ENV_INIT_X] + _uniform_signed(&state) * (jitter * x_limit)
    cdef double xdot = env[ENV_INIT_XDOT] + _uniform_signed(&state) * (jitter * xdot_limit)
    cdef double theta = env[ENV_INIT_THETA] + _uniform_signed(&state) * (jitter * theta_limit)
    cdef double thetadot = env[ENV_INIT_THETADOT] + _uniform_signed(&state) * (jitter * thetadot_limit)

    cdef int prev_action = tie_default
    cdef int action
    cdef Py_ssize_t fitness = 0
    cdef Py_ssize_t recorded = 0
    cdef Py_ssize_t cycle = 0
    cdef Py_ssize_t step_i, sub, row, vi, b, src, si
    cdef Py_ssize_t votes_l, votes_r
    cdef double nrm, charge, v0, v, u, p_fire
    cdef double force, costheta, sintheta, tmp, thetaacc, xacc
    cdef bint fired

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
                    b = <Py_ssize_t>((nrm + 1.0) * 0.5 * n_bins)
                    if b >= n_bins:
                        b = n_bins - 1
                    src = enc_ports[vi * n_bins + b]
                    if src >= 0:
                        for si in range(src_off[src], src_off[src + 1]):
                            buf[(cycle + syn_delay[si]) % rows, syn_post[si]] += syn_w[si]
            for i in range(n):
                charge = buf[row, i]
                v0 = volt[i]
                v = v0 * decay if leaky else v0
                v = v + charge
                if not noisy:
                    fired = v >= thr_eff[i]
                else:
                    fired = False
                    if charge != 0.0 or (leaky and v0 != 0.0):
                        u = _uniform(&state)
                        if v >= thresholds[i]:
                            p_fire = 1.0
                        else:
                            p_fire = exp(-(thresholds[i] - v) / (thresholds[i] * sig2))
                        fired = u < p_fire
                if fired:
                    volt[i] = 0.0
                    if i == out_left:
                        votes_l += 1
                    if i == out_right:
                        votes_r += 1
                    src = n_inputs + i
                    for si in range(src_off[src], src_off[src + 1]):
                        buf[(cycle + syn_delay[si]) % rows, syn_post[si]] += syn_w[si]
                else:
                    volt[i] = v
            for i in range(n):
                buf[row, i] = 0.0
            cycle += 1
        if votes_r > votes_l:
            action = 1
        elif votes_l > votes_r:
            action = -1
        else:
            action = prev_action
        prev_action = action
        if do_record:
            rec[recorded, 0] = step_i
            rec[recorded, 1] = x
            rec[recorded, 2] = xdot
            rec[recorded, 3] = theta
            rec[recorded, 4] = thetadot
            rec[recorded, 5] = action
            recorded += 1
        force = action * force_mag
        costheta = cos(theta)
        sintheta = sin(theta)
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
