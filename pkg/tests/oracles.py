"""Straight-line reference implementations used as independent test oracles.

Plain Python loops over lists, written from the decoding and PR definitions
without reusing any package code.
"""

import math


def argmax_assignment(S_R):
    labels = []
    for row in S_R:
        best, best_val = None, 0
        for l, v in enumerate(row):
            if v > best_val:
                best, best_val = l, v
        labels.append(best)
    return labels


def _standard(values, labels, R):
    out = [0.0] * R
    for l in range(R):
        for m, lab in enumerate(labels):
            if lab == l:
                out[l] += values[m]
    return out


def _prob(values):
    total = sum(values)
    lo, hi = min(values), max(values)
    if hi == lo or total == 0:
        return [0.0] * len(values)
    return [(1.0 / total) * ((x - lo) / (hi - lo)) for x in values]


def _weighted_matrix(S_q, S_R, gamma):
    K, R = len(S_R), len(S_R[0])
    omega = [sum(1 for l in range(R) if S_R[i][l] > 0) for i in range(K)]
    regularized = []
    for i in range(K):
        if omega[i] == 0:
            regularized.append(0.0)
        elif omega[i] <= gamma * R:
            regularized.append(float(S_q[i]))
        else:
            regularized.append(S_q[i] / omega[i])
    strength = []
    for i in range(K):
        row_total = sum(S_R[i])
        strength.append([regularized[i] * S_R[i][l] / row_total if row_total > 0 else 0.0
                         for l in range(R)])
    factor = []
    for l in range(R):
        den = sum(S_R[m][l] for m in range(K) if S_R[m][l] > 0)
        num = sum(S_R[m][l] for m in range(K) if S_R[m][l] > 0 and S_q[m] > 0)
        factor.append(num / den if den > 0 else 0.0)
    return [[strength[i][l] * factor[l] for l in range(R)] for i in range(K)]


def decode_scores(S_q, S_R, scheme, gamma):
    K, R = len(S_R), len(S_R[0])
    labels = argmax_assignment(S_R)
    if scheme == "standard":
        return _standard([float(x) for x in S_q], labels, R)
    if scheme == "prob":
        return _standard(_prob([float(x) for x in S_q]), labels, R)
    hat = _weighted_matrix(S_q, S_R, gamma)
    if scheme == "weighted":
        return [sum(hat[i][l] for i in range(K) if S_R[i][l] > 0) for l in range(R)]
    if scheme == "weighted_prob":
        per_neuron = [sum(hat[i]) for i in range(K)]
        tilde = _prob(per_neuron)
        return [sum(tilde[i] for i in range(K) if S_R[i][l] > 0) for l in range(R)]
    raise ValueError(scheme)


def pr_enumeration(predicted, confidence, truth):
    """Evaluate every distinct confidence threshold explicitly."""
    n = len(truth)
    points = []
    for c in sorted(set(confidence), reverse=True):
        accepted = [q for q in range(n) if confidence[q] >= c]
        correct = sum(1 for q in accepted if predicted[q] == truth[q])
        points.append((correct / n, correct / len(accepted)))
    perfect = [r for r, p in points if p == 1.0]
    r_at_100p = max(perfect) if perfect else 0.0
    prev_r, prev_p = 0.0, points[0][1]
    terms = []
    for r, p in points:
        terms.append((r - prev_r) * (p + prev_p) / 2.0)
        prev_r, prev_p = r, p
    return points, math.fsum(terms), r_at_100p, points[-1][1]


def lif_analytic(t, v0, g_e, g_i, tau, E_rest, E_exc, E_inh):
    """Closed-form membrane voltage under frozen conductances."""
    g = 1.0 + g_e + g_i
    v_inf = (E_rest + g_e * E_exc + g_i * E_inh) / g
    return v_inf + (v0 - v_inf) * math.exp(-t * g / tau)


def lif_charge_time(rate_hz, w, tau_ge, tau, E_rest, E_exc, V_thresh, n_inputs=1):
    """Time (ms) for V to reach threshold from rest under the mean input conductance.

    Returns ``inf`` when the mean-conductance fixed point stays below threshold.
    """
    g = n_inputs * rate_hz / 1000.0 * w * tau_ge
    v_inf = (E_rest + g * E_exc) / (1.0 + g)
    if v_inf <= V_thresh:
        return math.inf
    return -tau / (1.0 + g) * math.log((V_thresh - v_inf) / (E_rest - v_inf))
