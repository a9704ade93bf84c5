# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling and objective kernels.

Twin of ``prefalign._pure``: every accumulation runs in the same left-to-right
order and all transcendentals go through libm, so results are bit-identical
to the pure-Python fallback (the extension is compiled with -ffp-contract=off
to keep FMA contraction from breaking that).  Keep the two files in lockstep.
"""

from libc.math cimport exp, log

import numpy as np

BACKEND_NAME = "compiled"

# transition sentinels (mirror prefalign.states)
cdef int DEAD = -1
cdef int STOP = -2
cdef int THINK_ENTRY = -3
cdef int ANSWER_ENTRY = -4
cdef int DIM_JUMP = -5
cdef int BLOCK_CLOSE = -6

# meta vector layout (mirror prefalign.states)
cdef int META_EV_OPEN_BASE = 0
cdef int META_N_BUCKETS = 1
cdef int META_PAIR_NEXT_BASE = 2
cdef int META_VERDICT_BASE = 3
cdef int META_N_DIMS = 4
cdef int META_SPAN = 5
cdef int META_MID = 6
cdef int META_DIM_TOKEN_BASE = 7
cdef int META_COEF_SELF = 8
cdef int META_BASE_M = 9
cdef int META_BASE_S = 10
cdef int META_MAX_LEN = 11
cdef int META_THINK_ENTRY = 12
cdef int META_ANSWER_ENTRY = 13
cdef int META_START_STATE = 14
cdef int META_GREEDY = 15
cdef int META_VERDICT_OVERRIDE = 16


def sample_episode(
    double[:, ::1] logits,
    int[:, ::1] trans,
    long[::1] meta,
    double[::1] uniforms,
    int[::1] buckets,
    int[::1] state_ev_dim,
    int[::1] token_evid_value,
    int[::1] dim_motion,
):
    cdef int n_vocab = logits.shape[1]
    cdef int n_dims = <int> meta[META_N_DIMS]
    cdef int ev_base = <int> meta[META_EV_OPEN_BASE]
    cdef int n_buckets = <int> meta[META_N_BUCKETS]
    cdef int pair_next_base = <int> meta[META_PAIR_NEXT_BASE]
    cdef int verdict_base = <int> meta[META_VERDICT_BASE]
    cdef int span = <int> meta[META_SPAN]
    cdef int grid = 2 * span + 1
    cdef int mid = <int> meta[META_MID]
    cdef int dim_token_base = <int> meta[META_DIM_TOKEN_BASE]
    cdef int coef_self = <int> meta[META_COEF_SELF]
    cdef int base_m = <int> meta[META_BASE_M]
    cdef int base_s = <int> meta[META_BASE_S]
    cdef int max_len = <int> meta[META_MAX_LEN]
    cdef int think_entry = <int> meta[META_THINK_ENTRY]
    cdef int answer_entry = <int> meta[META_ANSWER_ENTRY]
    cdef bint greedy = meta[META_GREEDY] != 0
    cdef int verdict_override = <int> meta[META_VERDICT_OVERRIDE]

    tokens_arr = np.empty(max_len, dtype=np.int32)
    states_arr = np.empty(max_len, dtype=np.int32)
    logps_arr = np.empty(max_len, dtype=np.float64)
    cdef int[::1] tokens = tokens_arr
    cdef int[::1] states = states_arr
    cdef double[::1] logps = logps_arr

    judgments_arr = np.zeros(n_dims, dtype=np.int32)
    used_arr = np.zeros(n_dims, dtype=np.int32)
    cdef int[::1] judgments = judgments_arr
    cdef int[::1] used = used_arr
    cdef int blocks_done = 0

    exps_arr = np.empty(n_vocab, dtype=np.float64)
    cdef double[::1] exps = exps_arr

    cdef int s = <int> meta[META_START_STATE]
    cdef int n = 0
    cdef int ended = 2
    cdef int t, v, pick, ev_dim, k, d, ns
    cdef int jm, js, dm, ds, cm, cs
    cdef double m, x, z, e, thresh, acc, best, logp

    for t in range(max_len):
        m = logits[s, 0]
        for v in range(1, n_vocab):
            x = logits[s, v]
            if x > m:
                m = x
        z = 0.0
        for v in range(n_vocab):
            e = exp(logits[s, v] - m)
            exps[v] = e
            z += e
        if greedy:
            pick = 0
            best = exps[0]
            for v in range(1, n_vocab):
                if exps[v] > best:
                    best = exps[v]
                    pick = v
        else:
            thresh = uniforms[t] * z
            acc = 0.0
            pick = n_vocab - 1
            for v in range(n_vocab):
                acc += exps[v]
                if acc > thresh:
                    pick = v
                    break
        logp = (logits[s, pick] - m) - log(z)

        tokens[n] = pick
        states[n] = s
        logps[n] = logp
        n += 1

        ev_dim = state_ev_dim[s]
        if ev_dim >= 0:
            k = token_evid_value[pick]
            if k > 0:
                judgments[ev_dim] = k

        ns = trans[s, pick]
        if ns == THINK_ENTRY:
            ns = think_entry
        elif ns == ANSWER_ENTRY:
            ns = answer_entry
        elif ns == DIM_JUMP:
            d = pick - dim_token_base
            if used[d] != 0:
                ns = DEAD
            else:
                used[d] = 1
                ns = ev_base + d * n_buckets + buckets[d]
        elif ns == BLOCK_CLOSE:
            blocks_done += 1
            if blocks_done < n_dims:
                ns = pair_next_base + (blocks_done - 1)
            elif verdict_override >= 0:
                ns = verdict_override
            else:
                jm = 0
                js = 0
                for d in range(n_dims):
                    k = judgments[d] if judgments[d] > 0 else mid
                    if dim_motion[d] != 0:
                        jm += k
                    else:
                        js += k
                dm = coef_self * jm + base_m
                ds = coef_self * js + base_s
                cm = (dm if dm > -span else -span)
                cm = (cm if cm < span else span) + span
                cs = (ds if ds > -span else -span)
                cs = (cs if cs < span else span) + span
                ns = verdict_base + cm * grid + cs
        if ns == DEAD:
            ended = 0
            break
        if ns == STOP:
            ended = 1
            break
        s = ns

    cdef int jm_eff = 0
    cdef int js_eff = 0
    for d in range(n_dims):
        k = judgments[d] if judgments[d] > 0 else mid
        if dim_motion[d] != 0:
            jm_eff += k
        else:
            js_eff += k
    return tokens_arr[:n], states_arr[:n], logps_arr[:n], jm_eff, js_eff, ended, blocks_done


def objective(
    double[:, ::1] theta,
    double[:, ::1] ref,
    int[::1] states,
    int[::1] tokens,
    double[::1] old_logps,
    long[::1] ep_offsets,
    double[::1] ep_weights,
    double[::1] advantages,
    double clip_delta,
    double kl_coef,
):
    cdef int n_states = theta.shape[0]
    cdef int n_vocab = theta.shape[1]
    grad_arr = np.zeros((n_states, n_vocab), dtype=np.float64)
    cdef double[:, ::1] grad = grad_arr

    # per-state caches, filled lazily
    probs_arr = np.empty((n_states, n_vocab), dtype=np.float64)
    logp_arr = np.empty((n_states, n_vocab), dtype=np.float64)
    ref_logp_arr = np.empty((n_states, n_vocab), dtype=np.float64)
    kl_arr = np.empty(n_states, dtype=np.float64)
    cached_arr = np.zeros(n_states, dtype=np.int32)
    cdef double[:, ::1] probs_c = probs_arr
    cdef double[:, ::1] logp_c = logp_arr
    cdef double[:, ::1] ref_logp_c = ref_logp_arr
    cdef double[::1] kl_c = kl_arr
    cdef int[::1] cached = cached_arr

    cdef double lo = 1.0 - clip_delta
    cdef double hi = 1.0 + clip_delta
    cdef double surr_total = 0.0
    cdef double kl_total = 0.0
    cdef int n_ep = ep_weights.shape[0]
    cdef int i, t, s, v, u
    cdef double w, a, m, x, z, e, logz, kl_t
    cdef double ratio, unclipped, clipped, cl_ratio, surr, coef, wk, ind

    for i in range(n_ep):
        w = ep_weights[i]
        a = advantages[i]
        for t in range(<int> ep_offsets[i], <int> ep_offsets[i + 1]):
            s = states[t]
            v = tokens[t]
            if cached[s] == 0:
                # theta softmax row
                m = theta[s, 0]
                for u in range(1, n_vocab):
                    x = theta[s, u]
                    if x > m:
                        m = x
                z = 0.0
                for u in range(n_vocab):
                    e = exp(theta[s, u] - m)
                    probs_c[s, u] = e
                    z += e
                logz = log(z)
                for u in range(n_vocab):
                    probs_c[s, u] = probs_c[s, u] / z
                    logp_c[s, u] = (theta[s, u] - m) - logz
                # reference softmax row
                m = ref[s, 0]
                for u in range(1, n_vocab):
                    x = ref[s, u]
                    if x > m:
                        m = x
                z = 0.0
                for u in range(n_vocab):
                    z += exp(ref[s, u] - m)
                logz = log(z)
                for u in range(n_vocab):
                    ref_logp_c[s, u] = (ref[s, u] - m) - logz
                kl_t = 0.0
                for u in range(n_vocab):
                    kl_t += probs_c[s, u] * (logp_c[s, u] - ref_logp_c[s, u])
                kl_c[s] = kl_t
                cached[s] = 1
            ratio = exp(logp_c[s, v] - old_logps[t])
            unclipped = ratio * a
            cl_ratio = ratio
            if cl_ratio < lo:
                cl_ratio = lo
            elif cl_ratio > hi:
                cl_ratio = hi
            clipped = cl_ratio * a
            surr = unclipped if unclipped <= clipped else clipped
            surr_total += w * surr
            if unclipped <= clipped:
                coef = w * a * ratio
                for u in range(n_vocab):
                    ind = 1.0 if u == v else 0.0
                    grad[s, u] -= coef * (ind - probs_c[s, u])
            if kl_coef != 0.0:
                kl_t = kl_c[s]
                kl_total += w * kl_t
                wk = w * kl_coef
                for u in range(n_vocab):
                    grad[s, u] += wk * probs_c[s, u] * ((logp_c[s, u] - ref_logp_c[s, u]) - kl_t)
    cdef double loss = -surr_total + kl_coef * kl_total
    return loss, surr_total, kl_total, grad_arr
