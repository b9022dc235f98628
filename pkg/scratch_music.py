"""Scratch: diagnose MUSIC failure — eigenstructure of the whitened
UL-free covariance on desk-scale trials."""
import numpy as np
import threadpoolctl

threadpoolctl.threadpool_limits(limits=1)

from scipy.linalg import solve_triangular

from fdisac.analog_combiner import CombinerDesignConfig, comm_eigen_directions, \
    design_analog_combiner, initial_combiner
from fdisac.channel import array_response, draw_scenario
from fdisac.config import SimConfig
from fdisac.digital_rx import ul_interference_covariance
from fdisac.harness import simulate_frame
from fdisac.linalg import cholesky, hermitian_eig
from fdisac.precoding import design_bs_precoders
from fdisac.sensing import beamspace_music, sample_covariance, ul_free_covariance, whiten
from fdisac.ue import dl_combiner, ul_precoder

cfg = SimConfig(n_symbols=56)

for k in range(6):
    seed = cfg.master_seed + k
    scenario = draw_scenario(cfg, seed)
    rng_design = np.random.default_rng([cfg.master_seed, k, 1])
    rng_frame = np.random.default_rng([cfg.master_seed, k, 2])
    tracked = scenario.targets[0]
    angle_initial = tracked.angle + np.deg2rad(1.0) * rng_design.standard_normal()
    combiners = np.stack([dl_combiner(scenario.dl_channels[i], 2, 2) for i in range(2)])
    ul_pre = np.stack([ul_precoder(scenario.ul_channels[j], 2, 2) for j in range(2)])
    precoded_ul = np.einsum("jmab,jmbs->jmas", scenario.ul_channels, ul_pre)
    w_com = comm_eigen_directions(precoded_ul, cfg.n_bs_rf, rng_design)
    w_init = initial_combiner(w_com, angle_initial, cfg.kappa2).matrix
    hybrid, _, _ = design_bs_precoders(scenario, combiners, w_init, cfg.dl_power(),
                                       angle_initial, cfg.tx_gain_threshold(), cfg.n_bs_rf)
    precoders = hybrid.compose_all()
    dcfg = CombinerDesignConfig(
        rx_gain_threshold=cfg.rx_gain_threshold(), comm_gain_threshold=cfg.comm_gain_threshold(),
        epsilon_modulus=cfg.epsilon_modulus, epsilon_step=cfg.epsilon_step,
        kappa2=cfg.kappa2, block_fraction=cfg.block_fraction, max_iters=cfg.bcd_max_iters)
    comb, _ = design_analog_combiner(scenario.si_channel, precoders, w_com,
                                     angle_initial, dcfg, rng_design)
    w_rf = comb.matrix
    combined_ul = np.einsum("ar,jmas->jmrs", w_rf.conj(), precoded_ul)
    frame = simulate_frame(scenario, precoders, combiners, combined_ul, w_rf,
                           cfg.dl_power(), cfg.ul_power(), rng_frame)
    cov = ul_free_covariance(sample_covariance(frame.bs_rx), combined_ul, cfg.ul_power())
    wcov = whiten(cov, w_rf)

    evals, evecs = hermitian_eig(wcov)
    # whitened target steering
    l = cholesky(w_rf.conj().T @ w_rf)
    s0 = solve_triangular(l, w_rf.conj().T @ array_response(cfg.n_bs_rx, tracked.angle),
                          lower=True)
    s0 /= np.linalg.norm(s0)
    overlaps = np.abs(evecs.conj().T @ s0) ** 2
    # theoretical target eigenvalue
    beam = np.einsum("a,imas->ims", array_response(cfg.n_bs_tx, tracked.angle).conj(),
                     precoders)
    tx_gain2 = float(np.sum(np.abs(beam[:, 0]) ** 2))  # at subcarrier 0
    lam_t = (cfg.dl_power() / 4) * abs(tracked.gain) ** 2 * tx_gain2 * float(
        np.linalg.norm(solve_triangular(l, w_rf.conj().T @ array_response(
            cfg.n_bs_rx, tracked.angle), lower=True)) ** 2)
    print(f"trial {k}: range {tracked.range_m:5.1f} evals {np.array2string(evals, precision=2, formatter={'float_kind': lambda x: f'{x:9.2e}'})} "
          f"| s0-overlap {np.round(overlaps, 2)} | pred lam_t {lam_t:9.2e} noise {scenario.noise_power_bs:8.1e}")
    for ns in (1, 2, 3):
        est = beamspace_music(wcov, w_rf, angle_initial, n_sources=ns)
        err = np.rad2deg(abs(est.refined_angle - tracked.angle))
        print(f"    n_sources={ns}: err {err:6.3f} deg")
