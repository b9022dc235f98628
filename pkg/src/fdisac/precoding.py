"""Hybrid precoder design at the full-duplex base station.

The fully digital stage maximizes a per-user signal-to-leakage-plus-noise
ratio (SLNR) whose leakage counts both multiuser interference and the
self-interference coupled through the analog combiner.  A second SLNR
problem with a rank-one numerator produces the sensing beam, the two are
blended with the largest trade-off weight that still meets the TX radar
gain threshold, and a greedy alternating factorization maps the result
onto a frequency-flat unit-modulus analog precoder plus per-subcarrier
digital precoders.
"""

from dataclasses import dataclass

import numpy as np

from .channel import array_response
from .errors import ContractViolationError, InfeasibleDesignError
from .linalg import generalized_hermitian_eig, svd

KAPPA_GRID_STEP = 0.01
FACTORIZE_MAX_ITERS = 50
FACTORIZE_REL_TOL = 1e-4


@dataclass
class LeakageMatrices:
    """Quadratic forms of one (subcarrier, user) SLNR problem.

    All matrices are n_bs_tx x n_bs_tx Hermitian PSD and already carry the
    per-stream power scaling P_dl / (U_dl * N_s).
    """

    own_signal: np.ndarray
    cross_leakage: np.ndarray
    si_leakage: np.ndarray
    noise_floor: float

    def denominator(self):
        n = self.own_signal.shape[0]
        return self.cross_leakage + self.si_leakage + self.noise_floor * np.eye(n)


@dataclass
class HybridPrecoder:
    """Frequency-flat analog stage plus per-(subcarrier, user) digital stages.

    ``analog`` is n_antennas x n_rf with unit-modulus entries; ``digital``
    is (n_users, n_subcarriers, n_rf, n_streams).  The composed precoder for
    user i at subcarrier m is ``analog @ digital[i, m]`` with Frobenius
    norm^2 equal to the stream count.
    """

    analog: np.ndarray
    digital: np.ndarray

    def compose(self, user, subcarrier):
        return self.analog @ self.digital[user, subcarrier]

    def compose_all(self):
        """All composed precoders, shape (n_users, M, n_antennas, n_streams)."""
        return np.einsum("ar,imrs->imas", self.analog, self.digital)


def leakage_matrices(scenario, dl_combiners, analog_combiner, dl_power):
    """Build the SLNR quadratic forms for every (subcarrier, user).

    ``dl_combiners[i, m]`` is the N_ue x N_s combiner of DL user i with
    trace(W^H W) = N_s.  Returns a (U_dl, M) object array of
    :class:`LeakageMatrices`; the SI term is frequency-flat and shared.
    """
    u_dl, n_sub = scenario.dl_channels.shape[:2]
    n_streams = dl_combiners.shape[-1]
    scale = dl_power / (u_dl * n_streams)
    for i in range(u_dl):
        for m in range(n_sub):
            tr = np.trace(dl_combiners[i, m].conj().T @ dl_combiners[i, m]).real
            if abs(tr - n_streams) > 1e-6 * n_streams:
                raise ContractViolationError(
                    f"combiner ({i}, {m}) power {tr:.6f} != stream count {n_streams}"
                )

    w_si = analog_combiner
    hw = scenario.si_channel.conj().T @ w_si
    si = scale * scenario.si_power_ratio * (hw @ hw.conj().T)
    si = 0.5 * (si + si.conj().T)

    own = np.empty((u_dl, n_sub), dtype=object)
    for i in range(u_dl):
        for m in range(n_sub):
            eff = dl_combiners[i, m].conj().T @ scenario.dl_channels[i, m]  # N_s x N_tx
            b = scale * (eff.conj().T @ eff)
            own[i, m] = 0.5 * (b + b.conj().T)

    out = np.empty((u_dl, n_sub), dtype=object)
    for i in range(u_dl):
        for m in range(n_sub):
            cross = np.zeros_like(si)
            for ii in range(u_dl):
                if ii != i:
                    cross += own[ii, m]
            out[i, m] = LeakageMatrices(
                own_signal=own[i, m],
                cross_leakage=cross,
                si_leakage=si,
                noise_floor=scenario.noise_power_ue,
            )
    return out


def comm_precoder_slnr(leakage, n_streams):
    """Communication precoder: top generalized eigenvectors of
    (own signal, leakage-plus-noise); columns have unit norm."""
    w, v = generalized_hermitian_eig(leakage.own_signal, leakage.denominator())
    return v[:, :n_streams]


def sensing_precoder_slnr(leakage, target_angle, n_streams):
    """Sensing precoder: the leading generalized eigenvector of the rank-one
    steering outer product against the same leakage denominator, replicated
    across all streams.

    For a rank-one numerator a a^H the leading generalized eigenvector is
    D^-1 a up to scale, so the solve is a single linear system.
    """
    n = leakage.own_signal.shape[0]
    a = array_response(n, target_angle)
    d = leakage.denominator()
    col = np.linalg.solve(d / np.linalg.norm(d), a)
    col = col / np.linalg.norm(col)
    # fix the global phase so the beam adds coherently at the target angle
    inner = np.vdot(a, col)
    if abs(inner) > 0:
        col = col * (inner.conjugate() / abs(inner))
    return np.tile(col[:, None], (1, n_streams))


def combine_precoders(f_com, f_rad, target_angle, tx_gain_threshold):
    """Blend communication and sensing precoders.

    Returns the power-normalized combination kappa * f_com + (1 - kappa) *
    f_rad for the largest kappa on the grid {1.00, 0.99, ..., 0} whose
    per-stream TX radar gain meets the threshold after normalization.
    """
    n, n_streams = f_com.shape
    a = array_response(n, target_angle)
    kappas = np.round(np.arange(1.0, -KAPPA_GRID_STEP / 2, -KAPPA_GRID_STEP), 10)
    for kappa in kappas:
        f = kappa * f_com + (1.0 - kappa) * f_rad
        norm = np.linalg.norm(f)
        if norm == 0.0:
            continue
        f = f * (np.sqrt(n_streams) / norm)
        gains = np.abs(a.conj() @ f)
        if np.all(gains >= tx_gain_threshold - 1e-12):
            return f, float(kappa)
    worst = int(np.argmin(np.abs(a.conj() @ (f_rad * (np.sqrt(n_streams) / np.linalg.norm(f_rad))))))
    raise InfeasibleDesignError(
        f"TX gain threshold {tx_gain_threshold:.3f} unreachable even for the "
        f"pure sensing precoder (weakest stream {worst})",
        stream=worst,
    )


def _greedy_analog_update(f_rf, digital, targets):
    """Column-wise exact coordinate minimization over unit-modulus columns.

    For column r the unconstrained least-squares column is
    u / s with u = sum_mi E_mi b_r^H and s = sum_mi ||b_r||^2; among
    unit-modulus vectors the error is minimized by the entrywise phase of u.
    """
    n_rf = f_rf.shape[1]
    # residual excluding nothing; per-column residual adds back its own term
    full = np.einsum("ar,imrs->imas", f_rf, digital)
    resid = targets - full
    for r in range(n_rf):
        b_r = digital[:, :, r, :]  # (U, M, N_s)
        e_r = resid + np.einsum("a,ims->imas", f_rf[:, r], b_r)
        u = np.einsum("imas,ims->a", e_r, b_r.conj())
        phases = np.where(np.abs(u) > 0, u / np.maximum(np.abs(u), 1e-300), f_rf[:, r])
        new_col = phases
        resid = e_r - np.einsum("a,ims->imas", new_col, b_r)
        f_rf[:, r] = new_col
    return f_rf


def hybrid_factorize(targets, n_rf, max_iters=FACTORIZE_MAX_ITERS):
    """Factor fully digital precoders into a shared analog stage and
    per-(subcarrier, user) digital stages.

    ``targets`` has shape (n_users, M, n_antennas, n_streams).  Alternates a
    least-squares digital update with a greedy unit-modulus analog column
    update; the squared error is non-increasing across iterations.  The
    returned digital stages are renormalized so every composed precoder has
    Frobenius norm^2 equal to the stream count.

    Returns ``(HybridPrecoder, error_trace)``.
    """
    targets = np.asarray(targets, dtype=np.complex128)
    u_users, n_sub, n_ant, n_streams = targets.shape
    if n_rf < n_streams:
        raise ContractViolationError("need at least as many RF chains as streams")

    stacked = targets.transpose(2, 0, 1, 3).reshape(n_ant, -1)
    u_lead, _, _ = svd(stacked)
    lead = u_lead[:, :n_rf]
    if lead.shape[1] < n_rf:  # fewer target directions than RF chains
        pad = np.ones((n_ant, n_rf - lead.shape[1]), dtype=np.complex128)
        lead = np.hstack([lead, pad])
    f_rf = np.exp(1j * np.angle(lead))
    f_rf[np.abs(lead) == 0] = 1.0

    digital = np.zeros((u_users, n_sub, n_rf, n_streams), dtype=np.complex128)
    trace = []
    prev_err = np.inf
    for _ in range(max_iters):
        pinv = np.linalg.pinv(f_rf)
        digital = np.einsum("ra,imas->imrs", pinv, targets)
        f_rf = _greedy_analog_update(f_rf, digital, targets)
        err = float(np.linalg.norm(targets - np.einsum("ar,imrs->imas", f_rf, digital)) ** 2)
        trace.append(err)
        if prev_err - err < FACTORIZE_REL_TOL * max(prev_err, 1e-300):
            break
        prev_err = err
    # final least-squares digital pass against the final analog stage
    pinv = np.linalg.pinv(f_rf)
    digital = np.einsum("ra,imas->imrs", pinv, targets)
    trace.append(float(np.linalg.norm(targets - np.einsum("ar,imrs->imas", f_rf, digital)) ** 2))

    composed = np.einsum("ar,imrs->imas", f_rf, digital)
    norms = np.linalg.norm(composed, axis=(2, 3), keepdims=True)
    digital = digital * (np.sqrt(n_streams) / np.maximum(norms, 1e-300))
    return HybridPrecoder(analog=f_rf, digital=digital), trace


def design_bs_precoders(scenario, dl_combiners, analog_combiner, dl_power,
                        target_angle, tx_gain_threshold, n_rf):
    """Full BS precoder chain: SLNR precoders, trade-off blend, factorization.

    Returns ``(HybridPrecoder, fully_digital_targets, kappa_per_(i, m))``.
    """
    u_dl, n_sub = scenario.dl_channels.shape[:2]
    n_streams = dl_combiners.shape[-1]
    leak = leakage_matrices(scenario, dl_combiners, analog_combiner, dl_power)
    targets = np.zeros((u_dl, n_sub, scenario.dl_channels.shape[3], n_streams),
                       dtype=np.complex128)
    kappas = np.zeros((u_dl, n_sub))
    for i in range(u_dl):
        for m in range(n_sub):
            f_com = comm_precoder_slnr(leak[i, m], n_streams)
            if tx_gain_threshold > 0.0:
                f_rad = sensing_precoder_slnr(leak[i, m], target_angle, n_streams)
                f, kappa = combine_precoders(f_com, f_rad, target_angle, tx_gain_threshold)
            else:
                f = f_com * (np.sqrt(n_streams) / np.linalg.norm(f_com))
                kappa = 1.0
            targets[i, m] = f
            kappas[i, m] = kappa
    hybrid, _ = hybrid_factorize(targets, n_rf)
    return hybrid, targets, kappas
