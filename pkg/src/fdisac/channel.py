"""Channel models and Monte Carlo scenario generation.

Geometric mmWave channels for the downlink/uplink, a doubly-selective
point-target channel for monostatic sensing, and a near-field LoS model
for the self-interference (SI) channel between the collocated TX and RX
arrays of the full-duplex base station.

Internal units are radians, seconds and linear watts; dB/dBm/degree
conversion happens at the config boundary.  All arrays are ULAs with
half-wavelength spacing, so steering depends only on sin(angle).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError

SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass
class OfdmNumerology:
    """OFDM frame geometry; symbol duration is cp + 1/subcarrier_spacing."""

    n_subcarriers: int
    n_symbols: int
    subcarrier_spacing: float  # Hz
    cp_duration: float         # s
    carrier_freq: float        # Hz

    @property
    def symbol_duration(self):
        return 1.0 / self.subcarrier_spacing + self.cp_duration

    @property
    def wavelength(self):
        return SPEED_OF_LIGHT / self.carrier_freq


@dataclass
class PathParams:
    """One propagation path of a UE channel."""

    gain: complex      # linear amplitude
    delay: float       # s, >= 0
    aoa: float         # rad, angle of arrival
    aod: float         # rad, angle of departure


@dataclass
class TargetParams:
    """One point target seen by the monostatic radar."""

    gain: complex            # linear amplitude from the radar-range equation
    doppler: float           # Hz, +2*velocity/wavelength for approaching targets
    round_trip_delay: float  # s, 2*range/c
    angle: float             # rad, AoA = AoD (monostatic)
    range_m: float
    velocity: float          # m/s, positive = approaching
    rcs: float               # m^2


@dataclass
class ScenarioRealization:
    """One Monte Carlo draw: channels, targets, SI channel and noise levels.

    ``dl_channels[i, m]`` is N_ue x N_bs_tx, ``ul_channels[j, m]`` is
    N_bs_rx x N_ue.  ``targets[0]`` is the target tracked this frame.
    """

    numerology: OfdmNumerology
    dl_channels: np.ndarray          # (U_dl, M, N_ue, N_bs_tx)
    ul_channels: np.ndarray          # (U_ul, M, N_bs_rx, N_ue)
    targets: list                    # list[TargetParams], tracked target first
    si_channel: np.ndarray           # (N_bs_rx, N_bs_tx)
    si_power_ratio: float            # rho, linear
    noise_power_bs: float            # sigma^2, W
    noise_power_ue: float            # sigma_i^2, W
    dl_paths: list = field(default_factory=list)  # list[list[PathParams]] per DL UE
    ul_paths: list = field(default_factory=list)  # list[list[PathParams]] per UL UE


def array_response(n_antennas, angle):
    """ULA steering vector, entry k = exp(-j pi k sin(angle)), k = 0..n-1."""
    if n_antennas < 1:
        raise ContractViolationError("array needs at least one element")
    k = np.arange(n_antennas)
    return np.exp(-1j * np.pi * k * np.sin(angle))


def _geometric_channel(paths, m, spacing, n_rx, n_tx, rx_of, tx_of):
    h = np.zeros((n_rx, n_tx), dtype=np.complex128)
    for p in paths:
        phase = np.exp(-2j * np.pi * m * p.delay * spacing)
        h += p.gain * phase * np.outer(rx_of(p), tx_of(p).conj())
    return h


def dl_channel(paths, m, numerology, n_ue, n_bs_tx):
    """Downlink channel at subcarrier m: sum of per-path outer products.

    Each path contributes gain * exp(-j 2 pi m tau df) * a_ue(aoa) a_bs^H(aod).
    """
    if not paths:
        raise ContractViolationError("channel needs at least one path")
    return _geometric_channel(
        paths, m, numerology.subcarrier_spacing, n_ue, n_bs_tx,
        lambda p: array_response(n_ue, p.aoa),
        lambda p: array_response(n_bs_tx, p.aod),
    )


def ul_channel(paths, m, numerology, n_bs_rx, n_ue):
    """Uplink channel at subcarrier m; mirror of dl_channel with a_bs_rx(aoa) a_ue^H(aod)."""
    if not paths:
        raise ContractViolationError("channel needs at least one path")
    return _geometric_channel(
        paths, m, numerology.subcarrier_spacing, n_bs_rx, n_ue,
        lambda p: array_response(n_bs_rx, p.aoa),
        lambda p: array_response(n_ue, p.aod),
    )


def target_channel(targets, m, n, numerology, n_bs_rx, n_bs_tx):
    """Radar target channel at subcarrier m, symbol n.

    Sum over targets of
    gain * exp(j 2 pi (n Ts doppler - m tau df)) * a_rx(theta) a_tx^H(theta);
    AoA equals AoD because the TX/RX arrays are collocated.
    """
    h = np.zeros((n_bs_rx, n_bs_tx), dtype=np.complex128)
    ts = numerology.symbol_duration
    df = numerology.subcarrier_spacing
    for t in targets:
        phase = np.exp(2j * np.pi * (n * ts * t.doppler - m * t.round_trip_delay * df))
        h += t.gain * phase * np.outer(
            array_response(n_bs_rx, t.angle), array_response(n_bs_tx, t.angle).conj()
        )
    return h


def radar_gain_power(wavelength, rcs, range_m):
    """Linear power gain of a point target: lambda^2 rcs / ((4 pi)^3 d^4)."""
    if range_m <= 0:
        raise ContractViolationError("target range must be positive")
    return wavelength**2 * rcs / ((4.0 * np.pi) ** 3 * range_m**4)


def si_channel(tx_positions, rx_positions, wavelength):
    """Near-field LoS self-interference channel between collocated arrays.

    Entry (p, q) is (gamma / d_pq) exp(-j 2 pi d_pq / lambda) with gamma
    chosen so that ||H||_F^2 = n_tx * n_rx.
    """
    tx = np.asarray(tx_positions, dtype=np.float64)
    rx = np.asarray(rx_positions, dtype=np.float64)
    diff = rx[:, None, :] - tx[None, :, :]
    d = np.linalg.norm(diff, axis=2)
    if np.any(d <= 0):
        raise ContractViolationError("coincident TX/RX elements in SI geometry")
    h = np.exp(-2j * np.pi * d / wavelength) / d
    gamma = np.sqrt(tx.shape[0] * rx.shape[0]) / np.linalg.norm(h)
    return gamma * h


def bs_array_positions(n_tx, n_rx, wavelength, separation_wavelengths=6.0):
    """Positions of the two collocated BS ULAs: both along x, offset in z."""
    dx = wavelength / 2.0
    tx = np.zeros((n_tx, 3))
    tx[:, 0] = np.arange(n_tx) * dx
    rx = np.zeros((n_rx, 3))
    rx[:, 0] = np.arange(n_rx) * dx
    rx[:, 2] = separation_wavelengths * wavelength
    return tx, rx


def tx_radar_gain(precoder_column, angle):
    """TX radar gain |a_tx^H(angle) f| of one precoder column."""
    col = np.asarray(precoder_column).ravel()
    return abs(np.vdot(array_response(col.size, angle), col))


def rx_radar_gain(combiner_column, angle):
    """RX radar gain |w^H a_rx(angle)| of one combiner column."""
    col = np.asarray(combiner_column).ravel()
    return abs(np.vdot(col, array_response(col.size, angle)))


def free_space_amplitude(wavelength, distance):
    """Free-space path amplitude lambda / (4 pi d)."""
    return wavelength / (4.0 * np.pi * distance)


def _draw_ue_paths(rng, cfg, numerology, uplink):
    """Paths of one UE channel: LoS anchored to free-space loss at the UE
    distance, NLoS gains 5-15 dB below LoS with independent angles."""
    lam = numerology.wavelength
    dist = cfg.ue_distance
    los_angle = rng.uniform(*cfg.ue_angle_range)
    los_amp = free_space_amplitude(lam, dist)
    paths = []
    for l in range(cfg.n_paths):
        if l == 0:
            amp = los_amp
            bs_angle = los_angle
            ue_angle = 0.0  # UE arrays face the BS broadside
            delay = dist / SPEED_OF_LIGHT
        else:
            rel_db = rng.uniform(-15.0, -5.0)
            amp = los_amp * 10.0 ** (rel_db / 20.0)
            bs_angle = rng.uniform(-np.pi / 2, np.pi / 2)
            ue_angle = rng.uniform(-np.pi / 2, np.pi / 2)
            delay = dist / SPEED_OF_LIGHT + rng.uniform(0.0, cfg.nlos_excess_delay)
        gain = amp * np.exp(2j * np.pi * rng.uniform())
        if uplink:
            paths.append(PathParams(gain=gain, delay=delay, aoa=bs_angle, aod=ue_angle))
        else:
            paths.append(PathParams(gain=gain, delay=delay, aoa=ue_angle, aod=bs_angle))
    return paths


def _draw_target(rng, cfg, numerology):
    lam = numerology.wavelength
    angle = rng.uniform(*cfg.target_angle_range)
    range_m = rng.uniform(*cfg.target_range_span)
    velocity = rng.uniform(*cfg.target_speed_span)
    amp = np.sqrt(radar_gain_power(lam, cfg.target_rcs, range_m))
    gain = amp * np.exp(2j * np.pi * rng.uniform())
    return TargetParams(
        gain=gain,
        doppler=2.0 * velocity / lam,
        round_trip_delay=2.0 * range_m / SPEED_OF_LIGHT,
        angle=angle,
        range_m=range_m,
        velocity=velocity,
        rcs=cfg.target_rcs,
    )


def draw_scenario(cfg, seed):
    """Draw one full scenario realization, deterministic in the seed.

    Geometry (targets, UE paths) is drawn first with a draw count that does
    not depend on the subcarrier count, so realizations with different M but
    the same seed share identical geometry.
    """
    rng = np.random.default_rng(seed)
    num = cfg.numerology()
    m_all = np.arange(cfg.n_subcarriers)

    targets = [_draw_target(rng, cfg, num) for _ in range(cfg.n_targets)]
    dl_paths = [_draw_ue_paths(rng, cfg, num, uplink=False) for _ in range(cfg.n_dl_users)]
    ul_paths = [_draw_ue_paths(rng, cfg, num, uplink=True) for _ in range(cfg.n_ul_users)]

    dl = np.zeros((cfg.n_dl_users, cfg.n_subcarriers, cfg.n_ue, cfg.n_bs_tx), np.complex128)
    for i, paths in enumerate(dl_paths):
        for p in paths:
            ramp = p.gain * np.exp(-2j * np.pi * m_all * p.delay * num.subcarrier_spacing)
            outer = np.outer(array_response(cfg.n_ue, p.aoa),
                             array_response(cfg.n_bs_tx, p.aod).conj())
            dl[i] += ramp[:, None, None] * outer[None, :, :]

    ul = np.zeros((cfg.n_ul_users, cfg.n_subcarriers, cfg.n_bs_rx, cfg.n_ue), np.complex128)
    for j, paths in enumerate(ul_paths):
        for p in paths:
            ramp = p.gain * np.exp(-2j * np.pi * m_all * p.delay * num.subcarrier_spacing)
            outer = np.outer(array_response(cfg.n_bs_rx, p.aoa),
                             array_response(cfg.n_ue, p.aod).conj())
            ul[j] += ramp[:, None, None] * outer[None, :, :]

    tx_pos, rx_pos = bs_array_positions(cfg.n_bs_tx, cfg.n_bs_rx, num.wavelength,
                                        cfg.array_separation_wavelengths)
    h_si = si_channel(tx_pos, rx_pos, num.wavelength)

    return ScenarioRealization(
        numerology=num,
        dl_channels=dl,
        ul_channels=ul,
        targets=targets,
        si_channel=h_si,
        si_power_ratio=cfg.si_power_ratio(),
        noise_power_bs=cfg.noise_power_bs(),
        noise_power_ue=cfg.noise_power_ue(),
        dl_paths=dl_paths,
        ul_paths=ul_paths,
    )
