"""Spectral-efficiency and self-interference figures of merit."""

import numpy as np

from .channel import array_response
from .linalg import cholesky, hermitian_eig, svd
from scipy.linalg import solve_triangular

SI_DB_FLOOR = -200.0


def _log2_det_identity_plus(signal, covariance):
    """log2 |I + R^-1 S| for Hermitian PSD S and PD R, via whitening."""
    l = cholesky(covariance)
    tmp = solve_triangular(l, signal, lower=True, check_finite=False)
    c = solve_triangular(l, tmp.conj().T, lower=True, check_finite=False).conj().T
    w, _ = hermitian_eig(0.5 * (c + c.conj().T))
    return float(np.sum(np.log2(1.0 + np.maximum(w, 0.0))))


def dl_spectral_efficiency(scenario, precoders, combiners, dl_power, m, i):
    """DL rate of user i at subcarrier m, bits/s/Hz.

    ``precoders[i', m]`` are composed BS precoders, ``combiners[i, m]`` the
    UE combiners.  The interference-plus-noise covariance is the exact
    statistical one: scaled cross-user terms plus the combined UE noise.
    """
    u_dl = precoders.shape[0]
    n_streams = precoders.shape[-1]
    scale = dl_power / (u_dl * n_streams)
    w = combiners[i, m]
    h = scenario.dl_channels[i, m]
    eff = w.conj().T @ h  # N_s x N_tx
    r_z = scenario.noise_power_ue * (w.conj().T @ w)
    for ii in range(u_dl):
        if ii == i:
            continue
        cross = eff @ precoders[ii, m]
        r_z = r_z + scale * (cross @ cross.conj().T)
    own = eff @ precoders[i, m]
    return _log2_det_identity_plus(scale * (own @ own.conj().T),
                                   0.5 * (r_z + r_z.conj().T))


def _target_interference_term(scenario, analog_combiner, precoders, dl_power, m):
    """Symbol-averaged covariance of the target returns at the combiner
    output for subcarrier m (N_rf x N_rf)."""
    num = scenario.numerology
    u_dl, _, _, n_streams = precoders.shape
    n_sym = num.n_symbols
    targets = scenario.targets
    k = len(targets)
    if k == 0:
        n_rf = analog_combiner.shape[1]
        return np.zeros((n_rf, n_rf), dtype=np.complex128)
    u = np.stack([analog_combiner.conj().T @ array_response(analog_combiner.shape[0], t.angle)
                  for t in targets], axis=1)  # N_rf x K
    g = np.stack([
        np.einsum("a,ias->is", array_response(precoders.shape[2], t.angle).conj(),
                  precoders[:, m])
        for t in targets
    ])  # K x U x N_s
    n_idx = np.arange(n_sym)
    coef = np.stack([
        t.gain * np.exp(2j * np.pi * (n_idx * num.symbol_duration * t.doppler
                                      - m * t.round_trip_delay * num.subcarrier_spacing))
        for t in targets
    ])  # K x N
    c_avg = coef @ coef.conj().T / n_sym           # K x K symbol-averaged phases
    g2 = np.einsum("kis,lis->kl", g, g.conj())     # K x K combined TX beams
    term = u @ (c_avg * g2) @ u.conj().T
    return dl_power / (u_dl * n_streams) * 0.5 * (term + term.conj().T)


def ul_spectral_efficiency(scenario, combined_ul_channels, analog_combiner,
                           digital_combiners, precoders, dl_power, ul_power, m, j):
    """UL rate of user j at subcarrier m, bits/s/Hz.

    The interference-plus-noise covariance includes the other UL users,
    the symbol-averaged target returns, the residual SI after the analog
    combiner, and the combined noise, all in statistical form from the
    true channels.
    """
    t = np.asarray(combined_ul_channels)
    u_ul, _, _, n_streams = t.shape
    u_dl = precoders.shape[0]
    n_dl_streams = precoders.shape[-1]
    w_bb = digital_combiners[j][m]

    r = scenario.noise_power_bs * (analog_combiner.conj().T @ analog_combiner)
    for jj in range(u_ul):
        if jj == j:
            continue
        r = r + (ul_power / n_streams) * (t[jj, m] @ t[jj, m].conj().T)
    r = r + _target_interference_term(scenario, analog_combiner, precoders, dl_power, m)
    si = np.einsum("ab,ias->ibs", scenario.si_channel, precoders[:, m])
    si = np.einsum("ar,ias->irs", analog_combiner.conj(), si)
    r = r + (scenario.si_power_ratio * dl_power / (u_dl * n_dl_streams)) * np.einsum(
        "irs,ips->rp", si, si.conj()
    )
    r_nj = w_bb.conj().T @ (0.5 * (r + r.conj().T)) @ w_bb
    own = w_bb.conj().T @ t[j, m]
    return _log2_det_identity_plus((ul_power / n_streams) * (own @ own.conj().T),
                                   0.5 * (r_nj + r_nj.conj().T))


def residual_si_to_noise_db(analog_combiner, si_channel, precoders, si_power_ratio,
                            dl_power, noise_power):
    """Residual SI power at the combiner output over the combined noise
    power at the same point, in dB (floored at -200)."""
    u_dl, n_sub, _, n_streams = precoders.shape
    w = analog_combiner
    si = np.einsum("ar,ab,imbs->imrs", w.conj(), si_channel, precoders)
    si_power = (si_power_ratio * dl_power / (u_dl * n_streams)
                * float(np.sum(np.abs(si) ** 2)) / n_sub)
    noise = noise_power * float(np.linalg.norm(w) ** 2)
    ratio = si_power / noise
    if ratio <= 10.0 ** (SI_DB_FLOOR / 10.0):
        return SI_DB_FLOOR
    return float(10.0 * np.log10(ratio))


def su_capacity_bound(channel, total_power, noise_power):
    """Interference-free single-user capacity with waterfilling, bits/s/Hz.

    Upper-bounds any single-user rate at the given total power, hence also
    every multiuser rate with interference.
    """
    _, s, _ = svd(channel)
    gains = s**2 / noise_power
    gains = gains[gains > 0]
    if gains.size == 0:
        return 0.0
    inv = 1.0 / gains
    order = np.argsort(inv)
    inv = inv[order]
    k = gains.size
    while k > 0:
        level = (total_power + np.sum(inv[:k])) / k
        if level > inv[k - 1]:
            break
        k -= 1
    powers = np.maximum(level - inv[:k], 0.0)
    return float(np.sum(np.log2(1.0 + powers * gains[order][:k])))
