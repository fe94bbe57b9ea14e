"""Pure-numpy closed-loop kernel.

The compiled twin in ``_loop_cy.pyx`` implements the same step-for-step
semantics; ``dmckit.kernel`` picks whichever is importable.  Keep the two in
lockstep when changing anything here.
"""

import numpy as np

BACKEND_NAME = "python"


def run_unconstrained_loop(num, den, g1, g2, g3, step_coeffs, w_series,
                           ref_decay, shaped, v, steps, prediction_horizon,
                           divergence_limit):
    """Run ``steps`` samples of plant + unconstrained DMC feedback.

    num, den        (p, m, Ln) / (p, m, Ld) channel coefficients, extra
                    delays folded into num as leading zeros (num[:, :, 0]
                    must be zero: at least one sample delay).
    g1, g2, g3      first-move gain rows: du = g1 (W - Yfree) - g2 Yfree
                    + g3 y.  g2/g3 are zero for the plain two-term law.
    step_coeffs     (p, m, N) model step response for the prediction update.
    w_series        (p, steps + P) setpoints.
    ref_decay       (p, P) exp(-h/lambda) rows; applied where ``shaped``.
    v               (p, steps) output disturbance.
    Returns (y, u, du, steps_done); steps_done < steps means the output
    magnitude crossed ``divergence_limit`` and the run was cut short.
    """
    p, m, n_num = num.shape
    n_den = den.shape[2]
    N = step_coeffs.shape[2]
    P = prediction_horizon
    T = steps

    x = np.zeros((p, m, T))
    u = np.zeros((m, T))
    du = np.zeros((m, T))
    y = np.zeros((p, T))
    y_model = np.zeros((p, N))
    shaped_idx = np.flatnonzero(shaped)
    any_g2 = bool(np.any(g2)) or bool(np.any(g3))
    steps_done = T

    for k in range(T):
        xk = np.zeros((p, m))
        for lag in range(1, min(n_den, k + 1)):
            xk -= den[:, :, lag] * x[:, :, k - lag]
        for lag in range(1, min(n_num, k + 1)):
            xk += num[:, :, lag] * u[:, k - lag]
        x[:, :, k] = xk
        y_meas = xk.sum(axis=1) + v[:, k]
        y[:, k] = y_meas

        if k == 0:
            y_model[:] = y_meas[:, None]
        else:
            y_model += (y_meas - y_model[:, 0])[:, None]
        free = np.concatenate([y_model[:, 1:], y_model[:, -1:]], axis=1)
        yp0 = free[:, :P]

        wv = w_series[:, k + 1:k + 1 + P].copy()
        if shaped_idx.size:
            offset = y_meas[shaped_idx] - w_series[shaped_idx, k]
            wv[shaped_idx] += offset[:, None] * ref_decay[shaped_idx]

        yp0_flat = yp0.reshape(-1)
        du_now = g1 @ (wv.reshape(-1) - yp0_flat)
        if any_g2:
            du_now = du_now - g2 @ yp0_flat + g3 @ y_meas
        du[:, k] = du_now
        u[:, k] = (u[:, k - 1] if k else 0.0) + du_now

        y_model = free + np.tensordot(step_coeffs, du_now, axes=([1], [0]))

        if np.max(np.abs(y_meas)) > divergence_limit:
            steps_done = k + 1
            break

    return y[:, :steps_done], u[:, :steps_done], du[:, :steps_done], steps_done
