"""Fixed-step integration kernel shared by every scenario run.

The loop is written against flat numpy arrays so numba can JIT it; without
numba the same function runs as plain Python (identical semantics, slower).

Per step k (time t = k*dt):
  1. advance valve states to t,
  2. record a sample every ``rec_every`` steps,
  3. stop if past the schedule with all beads out, with motion no longer
     possible (every occlusion below the push threshold while all valves stay
     shut), or at the hard step cap,
  4. update chamber pressures one explicit Euler step (or set them directly
     from the valve state in instant mode), re-derive occlusions and
     generated pressures, and move the beads distal-first.

A bead is driven by the strongest eligible ring: occlusion >= o_push and the
ring's span either overlaps the bead or sits behind its rear within one bead
length. Any other ring fully ahead of the bead front with occlusion >=
o_block seals the path. Velocity is mobility * max(0, drive - p_fric); beads
clamp against the bead ahead and leave the lumen once their rear passes the
tube end.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


_TIME_EPS_S = 1e-12


@njit(cache=True)
def step_loop(
    dt,
    n_sched,
    n_cap,
    instant,
    ev_t,
    ev_open,
    ev_n,
    tau_fill,
    tau_vent,
    supply,
    vent,
    span_lo,
    span_hi,
    inv_p_close,
    gamma,
    gen_coef,
    o_push,
    o_block,
    p_fric,
    mobility,
    pos,
    bead_len,
    tube_len,
    rec_every,
    rec_step,
    rec_p,
    rec_occ,
    rec_pos,
    expelled_step,
):
    n_act = span_lo.shape[0]
    n_beads = pos.shape[0]

    p = np.zeros(n_act, dtype=np.float64)
    occ = np.zeros(n_act, dtype=np.float64)
    gen = np.zeros(n_act, dtype=np.float64)
    valve = np.zeros(n_act, dtype=np.bool_)
    ev_idx = np.zeros(n_act, dtype=np.int64)
    alive = np.ones(n_beads, dtype=np.bool_)
    n_alive = n_beads

    n_rec = 0
    k = 0
    capped = False
    while True:
        t = k * dt
        for a in range(n_act):
            while ev_idx[a] < ev_n[a] and ev_t[a, ev_idx[a]] <= t + _TIME_EPS_S:
                valve[a] = ev_open[a, ev_idx[a]] != 0
                ev_idx[a] += 1
        if instant:
            for a in range(n_act):
                p[a] = supply[a] if valve[a] else vent[a]
        for a in range(n_act):
            x = (p[a] * inv_p_close[a]) ** gamma[a]
            occ[a] = 1.0 if x > 1.0 else x
            gen[a] = gen_coef[a] * p[a]

        if k % rec_every == 0:
            rec_step[n_rec] = k
            for a in range(n_act):
                rec_p[n_rec, a] = p[a]
                rec_occ[n_rec, a] = occ[a]
            for i in range(n_beads):
                rec_pos[n_rec, i] = pos[i] if alive[i] else np.nan
            n_rec += 1

        if k >= n_sched:
            if n_alive == 0:
                break
            max_occ = 0.0
            for a in range(n_act):
                if occ[a] > max_occ:
                    max_occ = occ[a]
            if max_occ < o_push:
                break
        if k >= n_cap:
            capped = True
            break

        if not instant:
            for a in range(n_act):
                if valve[a]:
                    target = supply[a]
                    tau = tau_fill[a]
                else:
                    target = vent[a]
                    tau = tau_vent[a]
                p_new = p[a] + dt * (target - p[a]) / tau
                if p_new < 0.0:
                    p_new = 0.0
                elif p_new > supply[a]:
                    p_new = supply[a]
                p[a] = p_new
            for a in range(n_act):
                x = (p[a] * inv_p_close[a]) ** gamma[a]
                occ[a] = 1.0 if x > 1.0 else x
                gen[a] = gen_coef[a] * p[a]

        ahead_rear = np.inf
        for i in range(n_beads - 1, -1, -1):
            if not alive[i]:
                continue
            rear = pos[i]
            length = bead_len[i]
            front = rear + length

            drive = 0.0
            driving = -1
            for a in range(n_act):
                if occ[a] >= o_push and gen[a] > drive:
                    overlaps = span_lo[a] < front and span_hi[a] > rear
                    behind = span_hi[a] <= rear and rear - span_hi[a] <= length
                    if overlaps or behind:
                        drive = gen[a]
                        driving = a

            velocity = 0.0
            if driving >= 0:
                blocked = False
                for a in range(n_act):
                    if a != driving and occ[a] >= o_block and span_lo[a] >= front:
                        blocked = True
                        break
                if not blocked:
                    excess = drive - p_fric
                    if excess > 0.0:
                        velocity = mobility * excess

            new_rear = rear + velocity * dt
            if new_rear + length > ahead_rear:
                new_rear = ahead_rear - length
            pos[i] = new_rear
            if new_rear >= tube_len:
                alive[i] = False
                n_alive -= 1
                expelled_step[i] = k + 1
            else:
                ahead_rear = new_rear

        k += 1

    if n_rec == 0 or rec_step[n_rec - 1] != k:
        rec_step[n_rec] = k
        for a in range(n_act):
            rec_p[n_rec, a] = p[a]
            rec_occ[n_rec, a] = occ[a]
        for i in range(n_beads):
            rec_pos[n_rec, i] = pos[i] if alive[i] else np.nan
        n_rec += 1

    return n_rec, k, capped
