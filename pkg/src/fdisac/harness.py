"""Monte Carlo orchestration: frame synthesis and the full design chain.

``run_trial`` executes one seeded trial in the paper's order: scenario
draw, UE transceivers, BS SLNR precoders with the sensing blend, analog
combiner descent, digital combiners, frame simulation, angle refinement,
range-velocity estimation.  Everything is deterministic given
(master seed, trial index).
"""

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .analog_combiner import (
    CombinerDesignConfig,
    achieved_gains,
    comm_eigen_directions,
    design_analog_combiner,
    initial_combiner,
)
from .channel import array_response, draw_scenario, target_channel
from .digital_rx import lmmse_combiner, mvdr_combiner, ul_interference_covariance
from .metrics import (
    dl_spectral_efficiency,
    residual_si_to_noise_db,
    su_capacity_bound,
    ul_spectral_efficiency,
)
from .precoding import design_bs_precoders
from .sensing import (
    beamspace_music,
    delay_doppler_angle_refine,
    estimate_source_count,
    radar_image,
    radar_scalar_grid,
    range_velocity_estimate,
    tx_scalar_grid,
    ul_cancelled_covariance,
    whiten,
)
from .ue import dl_combiner, ul_precoder


@dataclass
class FrameData:
    """One simulated OFDM frame."""

    bs_rx: np.ndarray       # (M, N, N_rf) analog-combiner output
    dl_rx: np.ndarray       # (U_dl, M, N, N_s) DL UE combiner outputs
    dl_symbols: np.ndarray  # (U_dl, M, N, N_s)
    ul_symbols: np.ndarray  # (U_ul, M, N, N_s)


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    # communication metrics (per-subcarrier means of user sums, bits/s/Hz)
    dl_se_sum: float
    ul_se_sum: float
    dl_su_bound: float
    kappa_mean: float
    # SI trace
    si_initial_db: float
    si_final_db: float
    bcd_accepted: int
    si_trace: list = field(repr=False)
    # sensing
    angle_true: float
    angle_initial: float
    angle_refined: float
    angle_music: float
    range_true: float
    range_est: float
    range_bin: float
    velocity_true: float
    velocity_est: float
    velocity_bin: float
    peak_ratio: float
    masked_count: int
    rx_gains: list
    comm_gains: list
    artifacts: dict = field(default=None, repr=False)

    @property
    def angle_error_deg(self):
        return float(np.rad2deg(abs(self.angle_refined - self.angle_true)))

    @property
    def range_error(self):
        return abs(self.range_est - self.range_true)

    @property
    def velocity_error(self):
        return abs(self.velocity_est - self.velocity_true)

    @property
    def si_drop_db(self):
        return self.si_initial_db - self.si_final_db


def qpsk_symbols(rng, shape, per_stream_power):
    """Unit-energy QPSK scaled to the per-stream power."""
    re = rng.choice([1.0, -1.0], size=shape)
    im = rng.choice([1.0, -1.0], size=shape)
    return np.sqrt(per_stream_power / 2.0) * (re + 1j * im)


def simulate_frame(scenario, bs_precoders, dl_combiners, combined_ul_channels,
                   analog_combiner, dl_power, ul_power, rng):
    """Synthesize one OFDM frame of received samples.

    The BS output stacks the UL signals, the target returns, the scaled SI
    leakage and the combined noise; DL UE outputs carry the intended and
    interfering DL streams plus UE noise.
    """
    num = scenario.numerology
    m_sub, n_sym = num.n_subcarriers, num.n_symbols
    u_dl, _, n_tx, n_dl_s = bs_precoders.shape
    u_ul = combined_ul_channels.shape[0] if combined_ul_channels.size else 0
    n_ul_s = combined_ul_channels.shape[-1] if u_ul else 0
    n_rx = scenario.si_channel.shape[0]
    n_rf = analog_combiner.shape[1]

    d = qpsk_symbols(rng, (u_dl, m_sub, n_sym, n_dl_s), dl_power / (u_dl * n_dl_s))
    s = qpsk_symbols(rng, (u_ul, m_sub, n_sym, n_ul_s), ul_power / max(n_ul_s, 1))

    bs_rx = np.zeros((m_sub, n_sym, n_rf), dtype=np.complex128)
    if u_ul:
        bs_rx += np.einsum("jmrs,jmns->mnr", combined_ul_channels, s)

    # target returns, per-target rank-one decomposition
    targets = scenario.targets
    if targets:
        u_rx = np.stack([analog_combiner.conj().T @ array_response(n_rx, t.angle)
                         for t in targets], axis=1)  # N_rf x K
        g_tx = np.stack([
            np.einsum("a,imas->ims", array_response(n_tx, t.angle).conj(), bs_precoders)
            for t in targets
        ])  # K x U x M x N_s
        m_idx = np.arange(m_sub)[None, :, None]
        n_idx = np.arange(n_sym)[None, None, :]
        gains = np.array([t.gain for t in targets])[:, None, None]
        dopp = np.array([t.doppler for t in targets])[:, None, None]
        delay = np.array([t.round_trip_delay for t in targets])[:, None, None]
        coef = gains * np.exp(2j * np.pi * (n_idx * num.symbol_duration * dopp
                                            - m_idx * delay * num.subcarrier_spacing))
        beam_d = np.einsum("kims,imns->kmn", g_tx, d)
        bs_rx += np.einsum("kmn,rk->mnr", coef * beam_d, u_rx)

    si_eff = np.einsum("ar,ab,imbs->imrs", analog_combiner.conj(),
                       scenario.si_channel, bs_precoders)
    bs_rx += np.sqrt(scenario.si_power_ratio) * np.einsum("imrs,imns->mnr", si_eff, d)

    noise = np.sqrt(scenario.noise_power_bs / 2.0) * (
        rng.standard_normal((m_sub, n_sym, n_rx))
        + 1j * rng.standard_normal((m_sub, n_sym, n_rx))
    )
    bs_rx += np.einsum("ar,mna->mnr", analog_combiner.conj(), noise)

    dl_rx = np.zeros((u_dl, m_sub, n_sym, n_dl_s), dtype=np.complex128)
    for i in range(u_dl):
        eff = np.einsum("mus,mub,jmbt->jmst", dl_combiners[i].conj(),
                        scenario.dl_channels[i], bs_precoders)
        dl_rx[i] = np.einsum("jmst,jmnt->mns", eff, d)
        ue_noise = np.sqrt(scenario.noise_power_ue / 2.0) * (
            rng.standard_normal((m_sub, n_sym, scenario.dl_channels.shape[2]))
            + 1j * rng.standard_normal((m_sub, n_sym, scenario.dl_channels.shape[2]))
        )
        dl_rx[i] += np.einsum("mus,mnu->mns", dl_combiners[i].conj(), ue_noise)

    return FrameData(bs_rx=bs_rx, dl_rx=dl_rx, dl_symbols=d, ul_symbols=s)


def run_trial(cfg, trial_index, keep_artifacts=False):
    """Execute the full chain for one trial; deterministic in
    (cfg.master_seed, trial_index).

    With ``keep_artifacts`` the result carries the angle estimate and
    range-Doppler map for report rendering.
    """
    seed = cfg.master_seed + trial_index
    scenario = draw_scenario(cfg, seed)
    rng_design = np.random.default_rng([cfg.master_seed, trial_index, 1])
    rng_frame = np.random.default_rng([cfg.master_seed, trial_index, 2])

    tracked = scenario.targets[0]
    angle_initial = tracked.angle + np.deg2rad(
        cfg.initial_angle_error_std_deg) * rng_design.standard_normal()

    combiners = np.stack([
        dl_combiner(scenario.dl_channels[i], cfg.n_dl_streams, cfg.n_ue_rf)
        for i in range(cfg.n_dl_users)
    ])
    ul_pre = np.stack([
        ul_precoder(scenario.ul_channels[j], cfg.n_ul_streams, cfg.n_ue_rf)
        for j in range(cfg.n_ul_users)
    ])
    precoded_ul = np.einsum("jmab,jmbs->jmas", scenario.ul_channels, ul_pre)

    w_com = comm_eigen_directions(precoded_ul, cfg.n_bs_rf, rng_design)
    w_init = initial_combiner(w_com, angle_initial, cfg.kappa2).matrix

    hybrid, _, kappas = design_bs_precoders(
        scenario, combiners, w_init, cfg.dl_power(), angle_initial,
        cfg.tx_gain_threshold(), cfg.n_bs_rf,
    )
    precoders = hybrid.compose_all()

    design_cfg = CombinerDesignConfig(
        rx_gain_threshold=cfg.rx_gain_threshold(),
        comm_gain_threshold=cfg.comm_gain_threshold(),
        epsilon_modulus=cfg.epsilon_modulus,
        epsilon_step=cfg.epsilon_step,
        kappa2=cfg.kappa2,
        block_fraction=cfg.block_fraction,
        max_iters=cfg.bcd_max_iters,
        convergence_tol=cfg.bcd_convergence_tol,
    )
    si_db_scale = (scenario.si_power_ratio * cfg.dl_power()
                   / (cfg.n_dl_users * cfg.n_dl_streams)
                   / (cfg.n_subcarriers * scenario.noise_power_bs
                      * cfg.n_bs_rx * cfg.n_bs_rf))
    combiner, trace = design_analog_combiner(
        scenario.si_channel, precoders, w_com, angle_initial, design_cfg,
        rng_design, si_db_scale=si_db_scale,
    )
    w_rf = combiner.matrix

    combined_ul = np.einsum("ar,jmas->jmrs", w_rf.conj(), precoded_ul)
    covs = ul_interference_covariance(w_rf, combined_ul, cfg.ul_power(),
                                      scenario.noise_power_bs)
    digital = [
        [lmmse_combiner(covs[m], combined_ul[j, m]) for m in range(cfg.n_subcarriers)]
        for j in range(cfg.n_ul_users)
    ]

    frame = simulate_frame(scenario, precoders, combiners, combined_ul, w_rf,
                           cfg.dl_power(), cfg.ul_power(), rng_frame)

    # UL removal at the signal level: the statistical subtraction leaves a
    # finite-sample residual that buries the target return at this frame
    # size, while the reconstructed UL (known channels, decoded symbols)
    # cancels exactly.
    cov_clean = ul_cancelled_covariance(frame.bs_rx, combined_ul, frame.ul_symbols)
    whitened = whiten(cov_clean, w_rf)
    if cfg.music_sources > 0:
        n_sources = min(cfg.music_sources, cfg.n_bs_rf - 1)
    else:
        n_sources = estimate_source_count(
            whitened, cfg.n_subcarriers * cfg.n_symbols, max_sources=cfg.n_bs_rf - 1)
    est = beamspace_music(whitened, w_rf, angle_initial, n_sources=n_sources)
    angle_music = est.refined_angle

    # matched polish: a weakly illuminated target can be below the
    # covariance-domain resolution while the coherently integrated
    # delay-Doppler cell still carries a clean per-chain steering snapshot
    ul_recon = np.einsum("jmrs,jmns->mnr", combined_ul, frame.ul_symbols)
    tx_scalars = tx_scalar_grid(angle_initial, precoders, frame.dl_symbols)
    mvdr_prior = np.stack([mvdr_combiner(covs[m], w_rf, angle_initial)
                           for m in range(cfg.n_subcarriers)])
    angle_polish, _ = delay_doppler_angle_refine(
        frame.bs_rx - ul_recon, tx_scalars, w_rf, mvdr_prior, angle_initial)

    # the two refiners have complementary blind spots (weak targets vs
    # delay-Doppler cell collisions); keep the candidate whose matched
    # cancellation re-coheres the radar image best
    def image_at(angle):
        mvdr = np.stack([mvdr_combiner(covs[m], w_rf, angle)
                         for m in range(cfg.n_subcarriers)])
        y_rad = np.einsum("mr,mnr->mn", mvdr.conj(), frame.bs_rx)
        scalars = radar_scalar_grid(angle, mvdr, w_rf, precoders, frame.dl_symbols)
        image, masked = radar_image(y_rad, scalars)
        out = range_velocity_estimate(image, scenario.numerology)
        mag = np.abs(out[3].image)
        score = mag[out[2]] / max(float(np.median(mag)), 1e-300)
        return out, masked, score

    candidates = [angle_music]
    if abs(angle_polish - angle_music) > 1e-9:
        candidates.append(angle_polish)
    evaluated = [(image_at(a), a) for a in candidates]
    (est_tuple, masked, _), angle_refined = max(evaluated, key=lambda e: e[0][2])
    range_est, velocity_raw, _, rd_map = est_tuple
    # channel uses the two-way Doppler convention, recovery formula is one-way
    velocity_est = velocity_raw / 2.0

    dl_se = np.mean([
        sum(dl_spectral_efficiency(scenario, precoders, combiners, cfg.dl_power(), m, i)
            for i in range(cfg.n_dl_users))
        for m in range(cfg.n_subcarriers)
    ])
    ul_se = np.mean([
        sum(ul_spectral_efficiency(scenario, combined_ul, w_rf, digital, precoders,
                                   cfg.dl_power(), cfg.ul_power(), m, j)
            for j in range(cfg.n_ul_users))
        for m in range(cfg.n_subcarriers)
    ])
    bound = np.mean([
        sum(su_capacity_bound(scenario.dl_channels[i, m],
                              cfg.dl_power() / cfg.n_dl_users,
                              scenario.noise_power_ue)
            for i in range(cfg.n_dl_users))
        for m in range(cfg.n_subcarriers)
    ])

    g_rx, g_com = achieved_gains(w_rf, angle_initial, w_com)
    artifacts = None
    if keep_artifacts:
        artifacts = {"angle_estimate": est, "range_doppler": rd_map}
    return TrialResult(
        artifacts=artifacts,
        trial_index=trial_index,
        seed=seed,
        dl_se_sum=float(dl_se),
        ul_se_sum=float(ul_se),
        dl_su_bound=float(bound),
        kappa_mean=float(np.mean(kappas)),
        si_initial_db=trace[0]["si_to_noise_db"],
        si_final_db=trace[-1]["si_to_noise_db"],
        bcd_accepted=int(sum(r["accepted"] for r in trace[1:])),
        si_trace=trace,
        angle_true=float(tracked.angle),
        angle_initial=float(angle_initial),
        angle_refined=float(angle_refined),
        angle_music=float(angle_music),
        range_true=float(tracked.range_m),
        range_est=float(range_est),
        range_bin=float(rd_map.range_bin),
        velocity_true=float(tracked.velocity),
        velocity_est=float(velocity_est),
        velocity_bin=float(rd_map.velocity_bin),
        peak_ratio=float(rd_map.peak_to_second_peak_ratio()),
        masked_count=int(masked),
        rx_gains=[float(g) for g in g_rx],
        comm_gains=[float(g) for g in g_com],
    )


def run_many(cfg, n_trials=None, workers=1):
    """Run a batch of trials; each trial is seeded independently."""
    n = cfg.n_trials if n_trials is None else n_trials
    if workers <= 1:
        return [run_trial(cfg, k) for k in range(n)]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers, initializer=_limit_worker_threads) as ex:
        return list(ex.map(run_trial, [cfg] * n, range(n)))


def _limit_worker_threads():
    import threadpoolctl

    threadpoolctl.threadpool_limits(limits=1)


def sweep(cfg, axis, values, n_trials=None, workers=1):
    """One trial batch per axis value; returns a list of (value, results)."""
    out = []
    for value in values:
        sub = cfg.replace(**{axis: value})
        out.append((value, run_many(sub, n_trials=n_trials, workers=workers)))
    return out
