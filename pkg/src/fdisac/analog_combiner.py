"""Analog combiner design at the full-duplex BS receiver.

The combiner is the one stage that must suppress self-interference in the
analog domain, before the LNAs and ADCs, while still passing the uplink
beams and keeping RX gain toward the tracked target.  The non-convex gain
constraints are relaxed to convex gain-loss discs and the unit-modulus
constraint to a modulus box, and the resulting problem is attacked with a
random block coordinate descent: each iteration optimizes a random subset
of entries with a penalty-augmented projected gradient solver, renormalizes
every entry to the unit circle, and keeps the step only if the objective
did not increase.
"""

from dataclasses import dataclass

import numpy as np

from .channel import array_response
from .errors import ContractViolationError
from .linalg import hermitian_eig

INNER_MAX_ITERS = 300
INNER_GRAD_TOL = 1e-6
PENALTY_BOOST_ROUNDS = 2
CONVERGED_ACCEPTED_STEPS = 5


@dataclass
class CombinerDesignConfig:
    """Thresholds and knobs of the block coordinate descent.

    Gain thresholds are linear; a threshold of exactly 0 disables the
    corresponding constraint.  ``epsilon_modulus`` bounds |entry| - 1 inside
    a step, ``epsilon_step`` bounds the norm of one block update.
    """

    rx_gain_threshold: float
    comm_gain_threshold: float
    epsilon_modulus: float = 0.3
    epsilon_step: float = 0.1
    kappa2: float = 0.5
    block_fraction: float = 0.25
    max_iters: int = 200
    convergence_tol: float = 0.0

    def __post_init__(self):
        if self.epsilon_modulus <= 0 or self.epsilon_step <= 0:
            raise ContractViolationError("relaxation parameters must be positive")
        if not 0.0 <= self.kappa2 <= 1.0:
            raise ContractViolationError("kappa2 must lie in [0, 1]")
        if not 0.0 < self.block_fraction <= 1.0:
            raise ContractViolationError("block_fraction must lie in (0, 1]")


@dataclass
class AnalogCombiner:
    """Unit-modulus combiner matrix, N_bs_rx x N_rf."""

    matrix: np.ndarray


def comm_eigen_directions(precoded_ul_channels, n_rf, rng):
    """Communication reference directions for the combiner.

    ``precoded_ul_channels[j, m]`` is G V of UL user j at subcarrier m,
    shape (N_bs_rx, N_s).  The first U * N_s columns are the leading
    eigenvectors of each user's subcarrier-averaged precoded-channel
    covariance; any remaining columns are random linear combinations of
    those.  Every column is scaled to norm sqrt(N_bs_rx) to match an
    analog combiner column.
    """
    pc = np.asarray(precoded_ul_channels)
    n_users, n_sub, n_rx, n_streams = pc.shape
    cols = []
    for j in range(n_users):
        cov = np.einsum("mas,mbs->ab", pc[j], pc[j].conj()) / n_sub
        _, v = hermitian_eig(cov)
        cols.append(v[:, :n_streams])
    base = np.hstack(cols)
    if base.shape[1] >= n_rf:
        w = base[:, :n_rf].copy()
    else:
        extra = n_rf - base.shape[1]
        mix = rng.standard_normal((base.shape[1], extra)) + 1j * rng.standard_normal(
            (base.shape[1], extra)
        )
        w = np.hstack([base, base @ mix])
    w = w * (np.sqrt(n_rx) / np.linalg.norm(w, axis=0, keepdims=True))
    return w


def align_column_phases(w_com, target_angle):
    """Rotate each column's arbitrary global phase so its inner product
    with the target steering vector is real positive.

    Eigenvector phases are arbitrary; the blend with the steering bank and
    the gain-loss discs both presume phase-coherent references, so columns
    are anchored to the steering before use.  Columns nearly orthogonal to
    the steering are left untouched.
    """
    n_rx = w_com.shape[0]
    a = array_response(n_rx, target_angle)
    inner = a.conj() @ w_com
    phases = np.where(np.abs(inner) > 1e-9 * n_rx,
                      inner.conj() / np.maximum(np.abs(inner), 1e-300), 1.0)
    return w_com * phases[None, :]


def initial_combiner(w_com, target_angle, kappa2):
    """Entrywise-unit-modulus blend of the communication directions and a
    bank of steering columns toward the tracked target."""
    n_rx, n_rf = w_com.shape
    w_rad = np.tile(array_response(n_rx, target_angle)[:, None], (1, n_rf))
    mix = kappa2 * align_column_phases(w_com, target_angle) + (1.0 - kappa2) * w_rad
    mag = np.abs(mix)
    out = np.where(mag > 0, mix / np.maximum(mag, 1e-300), 1.0 + 0.0j)
    return AnalogCombiner(matrix=out)


def si_quadratic(si_channel, precoders):
    """PSD matrix Q with sum_mi ||W^H H_si F||_F^2 = tr(W^H Q W).

    ``precoders[i, m]`` are the composed BS precoders (N_bs_tx x N_s).
    """
    s = np.einsum("imas,imbs->ab", precoders, np.conj(precoders))
    hs = si_channel @ s @ si_channel.conj().T
    return 0.5 * (hs + hs.conj().T)


def si_objective(w, si_channel, precoders):
    """Total residual SI power across users and subcarriers (unweighted)."""
    q = si_quadratic(si_channel, precoders)
    return float(np.einsum("ar,ab,br->", w.conj(), q, w).real)


def achieved_gains(w, target_angle, w_com):
    """Per-column RX radar gain and communication gain of a combiner."""
    a = array_response(w.shape[0], target_angle)
    g_rx = np.abs(w.conj().T @ a)
    g_com = np.abs(np.einsum("ar,ar->r", w.conj(), w_com))
    return g_rx, g_com


def _hinge_penalties(w, steering, w_com, cfg):
    """Gain-loss hinge values per column, and their gradients w.r.t. W*."""
    n_rx = w.shape[0]
    grad = np.zeros_like(w)
    total = 0.0
    for threshold, ref in ((cfg.rx_gain_threshold, None),
                           (cfg.comm_gain_threshold, w_com)):
        if threshold <= 0.0:
            continue
        budget = n_rx - threshold
        for r in range(w.shape[1]):
            vec = steering if ref is None else ref[:, r]
            v = n_rx - np.vdot(w[:, r], vec)
            h = abs(v) - budget
            if h > 0.0:
                total += h * h
                grad[:, r] += -h * np.conj(v) * vec / max(abs(v), 1e-300)
    return total, grad


def _project_block(x, x_anchor, cfg):
    """Project block entries onto the modulus box, then the step ball."""
    mag = np.abs(x)
    cap = 1.0 + cfg.epsilon_modulus
    over = mag > cap
    if np.any(over):
        x = np.where(over, x * (cap / np.maximum(mag, 1e-300)), x)
    delta = x - x_anchor
    norm = np.linalg.norm(delta)
    if norm > cfg.epsilon_step:
        x = x_anchor + delta * (cfg.epsilon_step / norm)
    return x


def _solve_block(w_full, rows, cols, q, steering, w_com, cfg, penalty_weight):
    """Penalty-augmented projected gradient descent on the selected entries.

    Returns the updated full matrix (block entries replaced) and the final
    hinge violation total.
    """
    w = w_full.copy()
    anchor = w[rows, cols].copy()
    scale = max(np.linalg.norm(q, 2), 1e-300)
    step = 1.0 / scale
    x = anchor.copy()

    def value_and_grad(w_mat):
        obj = np.einsum("ar,ab,br->", w_mat.conj(), q, w_mat).real
        hinge, hinge_grad = _hinge_penalties(w_mat, steering, w_com, cfg)
        val = obj + penalty_weight * hinge
        grad_full = q @ w_mat + penalty_weight * hinge_grad
        return val, grad_full[rows, cols]

    val, grad = value_and_grad(w)
    for _ in range(INNER_MAX_ITERS):
        moved = False
        for _ in range(30):
            x_new = _project_block(x - step * grad, anchor, cfg)
            w[rows, cols] = x_new
            val_new, grad_new = value_and_grad(w)
            if val_new <= val:
                moved = True
                break
            step *= 0.5
        if not moved:
            w[rows, cols] = x
            break
        movement = np.linalg.norm(x_new - x)
        x, val, grad = x_new, val_new, grad_new
        step *= 1.3  # cheap adaptive growth; backtracking reins it in
        if movement < INNER_GRAD_TOL * cfg.epsilon_step:
            break
    hinge, _ = _hinge_penalties(w, steering, w_com, cfg)
    return w, hinge


def bcd_step(w_prev, rows, cols, q, steering, w_com, cfg, prev_objective,
             penalty_weight):
    """One block update: solve the relaxed subproblem on the selected
    entries, renormalize every entry to unit modulus, accept only if the
    objective did not increase.

    Returns ``(w_next, objective, accepted)``.
    """
    hinge_tol = 1e-4 * w_prev.shape[0] ** 2
    hinge_before, _ = _hinge_penalties(w_prev, steering, w_com, cfg)
    w_relaxed = w_prev
    mu = penalty_weight
    for _ in range(PENALTY_BOOST_ROUNDS):
        w_relaxed, hinge = _solve_block(w_prev, rows, cols, q, steering, w_com, cfg, mu)
        if hinge <= hinge_tol:
            break
        mu *= 10.0
    # Reject as infeasible only when the gain-loss violation could not even
    # be reduced within this block's step budget; a strictly decreasing
    # violation is restoration progress and goes through the normal
    # objective-acceptance rule.
    if hinge > hinge_tol and hinge >= hinge_before - 1e-12 * max(hinge_before, 1.0):
        return w_prev, prev_objective, False

    if np.array_equal(w_relaxed[rows, cols], w_prev[rows, cols]):
        return w_prev, prev_objective, False

    w_next = w_relaxed / np.maximum(np.abs(w_relaxed), 1e-300)
    objective = float(np.einsum("ar,ab,br->", w_next.conj(), q, w_next).real)
    if objective <= prev_objective:
        return w_next, objective, True
    return w_prev, prev_objective, False


def design_analog_combiner(si_channel, precoders, w_com, target_angle, cfg, rng,
                           si_db_scale=None):
    """Run the full block coordinate descent.

    ``precoders[i, m]`` are composed BS precoders.  ``si_db_scale``, when
    given, converts the raw objective to the reported residual
    SI-to-noise ratio: db = 10 log10(si_db_scale * objective), floored at
    -200 dB.  Returns ``(AnalogCombiner, trace)`` where ``trace`` rows are
    dicts with iteration, objective, si_to_noise_db and accepted flag.

    Iterations stop at ``cfg.max_iters`` or once the relative objective
    change stays below ``cfg.convergence_tol`` for five consecutive
    accepted steps.
    """
    q = si_quadratic(si_channel, precoders)
    steering = array_response(si_channel.shape[0], target_angle)
    w_com = align_column_phases(w_com, target_angle)
    w = initial_combiner(w_com, target_angle, cfg.kappa2).matrix
    n_entries = w.size
    block_size = max(1, int(round(cfg.block_fraction * n_entries)))
    penalty_weight = 10.0 * max(np.linalg.norm(q, 2), 1e-300)

    def to_db(obj):
        if si_db_scale is None:
            return None
        if obj * si_db_scale <= 1e-20:
            return -200.0
        return max(10.0 * np.log10(obj * si_db_scale), -200.0)

    objective = float(np.einsum("ar,ab,br->", w.conj(), q, w).real)
    trace = [dict(iteration=0, objective=objective, si_to_noise_db=to_db(objective),
                  accepted=True)]
    quiet_accepted = 0
    for it in range(1, cfg.max_iters + 1):
        flat = rng.choice(n_entries, size=block_size, replace=False)
        rows, cols = np.unravel_index(flat, w.shape)
        prev = objective
        w, objective, accepted = bcd_step(
            w, rows, cols, q, steering, w_com, cfg, objective, penalty_weight
        )
        trace.append(dict(iteration=it, objective=objective,
                          si_to_noise_db=to_db(objective), accepted=accepted))
        if accepted:
            rel = (prev - objective) / max(prev, 1e-300)
            quiet_accepted = quiet_accepted + 1 if rel < cfg.convergence_tol else 0
            if cfg.convergence_tol > 0.0 and quiet_accepted >= CONVERGED_ACCEPTED_STEPS:
                break
    return AnalogCombiner(matrix=w), trace
