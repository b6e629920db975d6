"""Peephole LSTM cell and sequence passes, forward and backward.

The cell follows the recurrence

    i = sigmoid(w_ix x + w_im m_prev + w_ie e_prev + b_i)
    f = sigmoid(w_fx x + w_fm m_prev + w_fe e_prev + b_f)
    g = tanh   (w_gx x + w_gm m_prev            + b_g)
    e = f * e_prev + i * g
    o = sigmoid(w_ox x + w_om m_prev + w_oe e   + b_o)
    m = o * tanh(e)

where ``m`` is the hidden state, ``e`` the cell state, and the w_*e
terms are full-matrix peepholes — the output gate peeks at the *current*
cell state.  All arrays are float64; batches are leading axes: inputs
(batch, input_dim), states (batch, hidden_dim).

The backward pass is analytic.  Because ``o`` depends on the current
cell state, the cell-state gradient picks up an extra ``da_o @ w_oe``
term alongside the usual ``dm * o * (1 - tanh(e)^2)`` path, and the
previous cell state receives peephole contributions from the input and
forget gates.
"""

import numpy as np

from .layers import uniform_init

GATE_WEIGHTS = (
    "w_ix", "w_im", "w_ie", "b_i",
    "w_fx", "w_fm", "w_fe", "b_f",
    "w_gx", "w_gm", "b_g",
    "w_ox", "w_om", "w_oe", "b_o",
)


def init_lstm_params(rng, input_dim, hidden_dim):
    """Fresh parameter dict, uniform(-r, r) with r = 1/sqrt(fan_in)."""
    h, d = hidden_dim, input_dim
    params = {}
    for gate, has_peephole in (("i", True), ("f", True), ("g", False), ("o", True)):
        params[f"w_{gate}x"] = uniform_init(rng, (h, d), d)
        params[f"w_{gate}m"] = uniform_init(rng, (h, h), h)
        if has_peephole:
            params[f"w_{gate}e"] = uniform_init(rng, (h, h), h)
        params[f"b_{gate}"] = np.zeros(h)
    return params


def _sigmoid(a):
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def lstm_cell_forward(x, m_prev, e_prev, params):
    """One step; returns (m, e, cache)."""
    p = params
    i = _sigmoid(x @ p["w_ix"].T + m_prev @ p["w_im"].T + e_prev @ p["w_ie"].T + p["b_i"])
    f = _sigmoid(x @ p["w_fx"].T + m_prev @ p["w_fm"].T + e_prev @ p["w_fe"].T + p["b_f"])
    g = np.tanh(x @ p["w_gx"].T + m_prev @ p["w_gm"].T + p["b_g"])
    e = f * e_prev + i * g
    o = _sigmoid(x @ p["w_ox"].T + m_prev @ p["w_om"].T + e @ p["w_oe"].T + p["b_o"])
    tanh_e = np.tanh(e)
    m = o * tanh_e
    cache = (x, m_prev, e_prev, i, f, g, e, o, tanh_e)
    return m, e, cache


def lstm_cell_backward(dm, de_acc, cache, params, grads):
    """Backward for one step.

    ``dm`` is the loss gradient arriving at this step's hidden state
    (recurrent + any injected), ``de_acc`` the gradient arriving at this
    step's cell state from the future.  Accumulates parameter gradients
    into ``grads`` and returns (dx, dm_prev, de_prev).
    """
    p = params
    x, m_prev, e_prev, i, f, g, e, o, tanh_e = cache

    do = dm * tanh_e
    da_o = do * o * (1.0 - o)
    de = dm * o * (1.0 - tanh_e**2) + de_acc + da_o @ p["w_oe"]

    di = de * g
    df = de * e_prev
    dg = de * i
    da_i = di * i * (1.0 - i)
    da_f = df * f * (1.0 - f)
    da_g = dg * (1.0 - g**2)

    grads["w_ix"] += da_i.T @ x
    grads["w_im"] += da_i.T @ m_prev
    grads["w_ie"] += da_i.T @ e_prev
    grads["b_i"] += da_i.sum(axis=0)
    grads["w_fx"] += da_f.T @ x
    grads["w_fm"] += da_f.T @ m_prev
    grads["w_fe"] += da_f.T @ e_prev
    grads["b_f"] += da_f.sum(axis=0)
    grads["w_gx"] += da_g.T @ x
    grads["w_gm"] += da_g.T @ m_prev
    grads["b_g"] += da_g.sum(axis=0)
    grads["w_ox"] += da_o.T @ x
    grads["w_om"] += da_o.T @ m_prev
    grads["w_oe"] += da_o.T @ e
    grads["b_o"] += da_o.sum(axis=0)

    dx = da_i @ p["w_ix"] + da_f @ p["w_fx"] + da_g @ p["w_gx"] + da_o @ p["w_ox"]
    dm_prev = da_i @ p["w_im"] + da_f @ p["w_fm"] + da_g @ p["w_gm"] + da_o @ p["w_om"]
    de_prev = de * f + da_i @ p["w_ie"] + da_f @ p["w_fe"]
    return dx, dm_prev, de_prev


def lstm_sequence_forward(xs, params):
    """Run the cell over xs of shape (steps, batch, input_dim).

    Returns (ms, caches) where ms has shape (steps, batch, hidden_dim).
    Initial hidden and cell states are zero.
    """
    steps, batch, _ = xs.shape
    hidden = params["b_i"].shape[0]
    m = np.zeros((batch, hidden))
    e = np.zeros((batch, hidden))
    ms = np.empty((steps, batch, hidden))
    caches = []
    for t in range(steps):
        m, e, cache = lstm_cell_forward(xs[t], m, e, params)
        ms[t] = m
        caches.append(cache)
    return ms, caches


def lstm_sequence_backward(dms, caches, params):
    """Backpropagate through time.

    ``dms`` holds the loss gradient injected at each step's hidden state,
    shape (steps, batch, hidden_dim).  Returns (grads, dxs) with dxs of
    shape (steps, batch, input_dim).
    """
    steps = len(caches)
    batch, input_dim = caches[0][0].shape
    grads = {k: np.zeros_like(params[k]) for k in GATE_WEIGHTS}
    dxs = np.empty((steps, batch, input_dim))
    dm_next = np.zeros_like(dms[0])
    de_next = np.zeros_like(dms[0])
    for t in range(steps - 1, -1, -1):
        dx, dm_next, de_next = lstm_cell_backward(
            dms[t] + dm_next, de_next, caches[t], params, grads
        )
        dxs[t] = dx
    return grads, dxs
