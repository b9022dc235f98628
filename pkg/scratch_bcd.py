"""Scratch probe: does BCD drop SI ~40 dB in 200 iters at desk scale?"""
import time

import numpy as np

from fdisac.analog_combiner import (
    CombinerDesignConfig, comm_eigen_directions, design_analog_combiner,
    achieved_gains,
)
from fdisac.channel import draw_scenario
from fdisac.config import SimConfig
from fdisac.precoding import design_bs_precoders
from fdisac.ue import dl_combiner, ul_precoder
from fdisac.analog_combiner import initial_combiner

import threadpoolctl
threadpoolctl.threadpool_limits(limits=1)

cfg = SimConfig()  # desk profile: 64x64, M=64, N=14
t0 = time.time()
scenario = draw_scenario(cfg, 1)
print(f"scenario {time.time()-t0:.2f}s")

rng = np.random.default_rng(99)
t0 = time.time()
combiners = np.stack([
    dl_combiner(scenario.dl_channels[i], cfg.n_dl_streams, cfg.n_ue_rf)
    for i in range(cfg.n_dl_users)
])
ul_pre = [ul_precoder(scenario.ul_channels[j], cfg.n_ul_streams, cfg.n_ue_rf)
          for j in range(cfg.n_ul_users)]
print(f"UE transceivers {time.time()-t0:.2f}s")

precoded_ul = np.stack([
    np.einsum("mab,mbs->mas", scenario.ul_channels[j], ul_pre[j])
    for j in range(cfg.n_ul_users)
])
w_com = comm_eigen_directions(precoded_ul, cfg.n_bs_rf, rng)
angle = scenario.targets[0].angle
w_init = initial_combiner(w_com, angle, cfg.kappa2).matrix

t0 = time.time()
hybrid, targets, kappas = design_bs_precoders(
    scenario, combiners, w_init, cfg.dl_power(), angle,
    cfg.tx_gain_threshold(), cfg.n_bs_rf)
print(f"BS precoders {time.time()-t0:.2f}s  kappa mean {kappas.mean():.3f}")

precoders = hybrid.compose_all()
dcfg = CombinerDesignConfig(
    rx_gain_threshold=cfg.rx_gain_threshold(),
    comm_gain_threshold=cfg.comm_gain_threshold(),
    epsilon_modulus=cfg.epsilon_modulus,
    epsilon_step=cfg.epsilon_step,
    kappa2=cfg.kappa2,
    block_fraction=cfg.block_fraction,
    max_iters=200,
)
scale = (scenario.si_power_ratio * cfg.dl_power()
         / (cfg.n_dl_users * cfg.n_dl_streams)
         / (cfg.n_subcarriers * scenario.noise_power_bs
            * cfg.n_bs_rx * cfg.n_bs_rf))
t0 = time.time()
comb, trace = design_analog_combiner(
    scenario.si_channel, precoders, w_com, angle, dcfg, rng, si_db_scale=scale)
dt = time.time() - t0
db = [r["si_to_noise_db"] for r in trace]
acc = sum(r["accepted"] for r in trace[1:])
print(f"BCD {dt:.2f}s  accepted {acc}/200")
print(f"initial {db[0]:.1f} dB  final {db[-1]:.1f} dB  drop {db[0]-db[-1]:.1f} dB")
g_rx, g_com = achieved_gains(comb.matrix, angle, w_com)
print(f"gains rx {np.round(g_rx,1)} (tau {cfg.rx_gain_threshold():.1f})  "
      f"com {np.round(g_com,1)} (tau {cfg.comm_gain_threshold():.1f})")
print("unit modulus dev:", np.abs(np.abs(comb.matrix) - 1).max())
idx = [0, 10, 25, 50, 100, 150, 200]
print("trace:", [f"{db[i]:.1f}" for i in idx])

# overlap of the combiner with the SI quadratic's range, init vs final
from fdisac.analog_combiner import si_quadratic

q = si_quadratic(scenario.si_channel, precoders)
wq, vq = np.linalg.eigh(q)
uq = vq[:, -6:]
print("Q top eigs:", np.round(wq[-6:] / wq[-1], 4))
c_final = np.linalg.norm(uq.conj().T @ comb.matrix)
c_init = np.linalg.norm(uq.conj().T @ w_init)
print(f"overlap with Q range: init {c_init:.3f} final {c_final:.3f}")
