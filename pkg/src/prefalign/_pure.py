"""Pure-Python sampling and objective kernels.

Reference twin of the compiled extension (``prefalign._speed``).  The two
must produce bit-identical results, so every accumulation here runs in the
same left-to-right order as the C loops and all transcendentals go through
libm (``math.exp`` / ``math.log``), which is what the extension calls too.
Keep the two files in lockstep when changing either.
"""

from __future__ import annotations

import math

import numpy as np

from .states import (
    ANSWER_ENTRY,
    BLOCK_CLOSE,
    DEAD,
    DIM_JUMP,
    META_ANSWER_ENTRY,
    META_BASE_M,
    META_BASE_S,
    META_COEF_SELF,
    META_DIM_TOKEN_BASE,
    META_EV_OPEN_BASE,
    META_GREEDY,
    META_MAX_LEN,
    META_MID,
    META_N_BUCKETS,
    META_N_DIMS,
    META_PAIR_NEXT_BASE,
    META_SPAN,
    META_START_STATE,
    META_THINK_ENTRY,
    META_VERDICT_BASE,
    META_VERDICT_OVERRIDE,
    STOP,
    THINK_ENTRY,
)

BACKEND_NAME = "pure-python"


def sample_episode(logits, trans, meta, uniforms, buckets, state_ev_dim, token_evid_value, dim_motion):
    """Sample (or greedily decode) one response.

    Returns ``(tokens, states, logps, jm_eff, js_eff)`` where states[t] is the
    state the t-th token was emitted from and the judgment sums are the
    response's first-evidence levels (missing dimensions filled with the
    middle level).
    """
    n_vocab = logits.shape[1]
    n_dims = int(meta[META_N_DIMS])
    ev_base = int(meta[META_EV_OPEN_BASE])
    n_buckets = int(meta[META_N_BUCKETS])
    pair_next_base = int(meta[META_PAIR_NEXT_BASE])
    verdict_base = int(meta[META_VERDICT_BASE])
    span = int(meta[META_SPAN])
    grid = 2 * span + 1
    mid = int(meta[META_MID])
    dim_token_base = int(meta[META_DIM_TOKEN_BASE])
    coef_self = int(meta[META_COEF_SELF])
    base_m = int(meta[META_BASE_M])
    base_s = int(meta[META_BASE_S])
    max_len = int(meta[META_MAX_LEN])
    think_entry = int(meta[META_THINK_ENTRY])
    answer_entry = int(meta[META_ANSWER_ENTRY])
    greedy = int(meta[META_GREEDY]) != 0
    verdict_override = int(meta[META_VERDICT_OVERRIDE])

    tokens = []
    states = []
    logps = []
    judgments = [0] * n_dims
    used = [False] * n_dims
    blocks_done = 0
    ended = 2  # 0 = died, 1 = stopped, 2 = hit the length cap

    s = int(meta[META_START_STATE])
    exps = [0.0] * n_vocab
    for t in range(max_len):
        row = logits[s]
        m = float(row[0])
        for v in range(1, n_vocab):
            x = float(row[v])
            if x > m:
                m = x
        z = 0.0
        for v in range(n_vocab):
            e = math.exp(float(row[v]) - m)
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
            thresh = float(uniforms[t]) * z
            acc = 0.0
            pick = n_vocab - 1
            for v in range(n_vocab):
                acc += exps[v]
                if acc > thresh:
                    pick = v
                    break
        logp = (float(row[pick]) - m) - math.log(z)

        tokens.append(pick)
        states.append(s)
        logps.append(logp)

        ev_dim = int(state_ev_dim[s])
        if ev_dim >= 0:
            k = int(token_evid_value[pick])
            if k > 0:
                judgments[ev_dim] = k

        ns = int(trans[s, pick])
        if ns == THINK_ENTRY:
            ns = think_entry
        elif ns == ANSWER_ENTRY:
            ns = answer_entry
        elif ns == DIM_JUMP:
            d = pick - dim_token_base
            if used[d]:
                ns = DEAD
            else:
                used[d] = True
                ns = ev_base + d * n_buckets + int(buckets[d])
        elif ns == BLOCK_CLOSE:
            blocks_done += 1
            if blocks_done < n_dims:
                ns = pair_next_base + (blocks_done - 1)
            elif verdict_override >= 0:
                ns = verdict_override
            else:
                jm, js = _judgment_sums(judgments, dim_motion, mid, n_dims)
                dm = coef_self * jm + base_m
                ds = coef_self * js + base_s
                cm = min(max(dm, -span), span) + span
                cs = min(max(ds, -span), span) + span
                ns = verdict_base + cm * grid + cs
        if ns == DEAD:
            ended = 0
            break
        if ns == STOP:
            ended = 1
            break
        s = ns

    jm_eff, js_eff = _judgment_sums(judgments, dim_motion, mid, n_dims)
    return (
        np.array(tokens, dtype=np.int32),
        np.array(states, dtype=np.int32),
        np.array(logps, dtype=np.float64),
        jm_eff,
        js_eff,
        ended,
        blocks_done,
    )


def _judgment_sums(judgments, dim_motion, mid, n_dims):
    jm = 0
    js = 0
    for d in range(n_dims):
        k = judgments[d] if judgments[d] > 0 else mid
        if int(dim_motion[d]) != 0:
            jm += k
        else:
            js += k
    return jm, js


def objective(theta, ref, states, tokens, old_logps, ep_offsets, ep_weights, advantages, clip_delta, kl_coef):
    """Clipped-surrogate loss with an exact per-state KL penalty, plus its
    analytic gradient with respect to the logit table.

    Per token the surrogate is ``min(ratio * A, clip(ratio) * A)``; gradients
    flow through the unclipped branch only when it attains the min.  The KL
    term is the exact categorical KL(theta || ref) at each visited state,
    averaged with the same per-episode weights as the surrogate.  Returns
    ``(loss, surrogate, kl, grad)`` with ``loss = -surrogate + kl_coef * kl``.
    """
    n_states, n_vocab = theta.shape
    grad = np.zeros((n_states, n_vocab))
    # per-state caches: softmax rows and KL depend on the state alone, and
    # states repeat heavily across a batch
    cache: dict[int, tuple] = {}

    lo = 1.0 - clip_delta
    hi = 1.0 + clip_delta
    surr_total = 0.0
    kl_total = 0.0
    n_ep = len(ep_weights)
    for i in range(n_ep):
        w = float(ep_weights[i])
        a = float(advantages[i])
        for t in range(int(ep_offsets[i]), int(ep_offsets[i + 1])):
            s = int(states[t])
            v = int(tokens[t])
            entry = cache.get(s)
            if entry is None:
                entry = _state_entry(theta, ref, s, n_vocab)
                cache[s] = entry
            probs, logp, ref_logp, kl_t = entry
            ratio = math.exp(logp[v] - float(old_logps[t]))
            unclipped = ratio * a
            clipped = min(max(ratio, lo), hi) * a
            surr = unclipped if unclipped <= clipped else clipped
            surr_total += w * surr
            if unclipped <= clipped:
                coef = w * a * ratio
                for u in range(n_vocab):
                    ind = 1.0 if u == v else 0.0
                    grad[s, u] -= coef * (ind - probs[u])
            if kl_coef != 0.0:
                kl_total += w * kl_t
                wk = w * kl_coef
                for u in range(n_vocab):
                    grad[s, u] += wk * probs[u] * ((logp[u] - ref_logp[u]) - kl_t)
    loss = -surr_total + kl_coef * kl_total
    return loss, surr_total, kl_total, grad


def _log_softmax_row(table, s, n_vocab):
    row = table[s]
    m = float(row[0])
    for v in range(1, n_vocab):
        x = float(row[v])
        if x > m:
            m = x
    z = 0.0
    exps = [0.0] * n_vocab
    for v in range(n_vocab):
        e = math.exp(float(row[v]) - m)
        exps[v] = e
        z += e
    logz = math.log(z)
    probs = [e / z for e in exps]
    logp = [(float(row[v]) - m) - logz for v in range(n_vocab)]
    return probs, logp


def _state_entry(theta, ref, s, n_vocab):
    probs, logp = _log_softmax_row(theta, s, n_vocab)
    _, ref_logp = _log_softmax_row(ref, s, n_vocab)
    kl = 0.0
    for v in range(n_vocab):
        kl += probs[v] * (logp[v] - ref_logp[v])
    return probs, logp, ref_logp, kl
