"""Simulation configuration.

``SimConfig`` carries every scenario and design parameter.  Fields use
human units (degrees, dBm, dB); conversion to radians / linear watts
happens in the accessor methods so the rest of the package never sees
logarithmic units.

Configs round-trip through JSON with keys equal to the field names.
"""

import dataclasses
import json
import math
from dataclasses import dataclass

from .channel import OfdmNumerology
from .errors import ContractViolationError


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


@dataclass
class SimConfig:
    # arrays and RF chains
    n_bs_tx: int = 64
    n_bs_rx: int = 64
    n_bs_rf: int = 4
    n_ue: int = 16
    n_ue_rf: int = 2
    array_separation_wavelengths: float = 6.0

    # users and streams
    n_dl_users: int = 2
    n_ul_users: int = 2
    n_dl_streams: int = 2
    n_ul_streams: int = 2

    # powers (dBm) and noise
    dl_power_dbm: float = 20.0
    ul_power_dbm: float = 10.0
    noise_power_dbm: float = -93.8
    si_to_noise_db: float = 80.0

    # OFDM numerology
    n_subcarriers: int = 64
    n_symbols: int = 14
    subcarrier_spacing_hz: float = 120e3
    cp_duration_s: float = 5.8667e-7
    carrier_freq_hz: float = 28e9

    # targets
    n_targets: int = 4
    target_rcs: float = 10.0
    target_angle_span_deg: tuple = (-60.0, 60.0)
    target_range_span: tuple = (20.0, 60.0)
    target_speed_span: tuple = (10.0, 30.0)

    # UE channel geometry
    ue_distance: float = 50.0
    ue_angle_span_deg: tuple = (-60.0, 60.0)
    n_paths: int = 5
    nlos_excess_delay: float = 200e-9

    # gain thresholds, as fractions of the relevant array gain
    tx_gain_fraction: float = 0.25   # of sqrt(n_bs_tx)
    rx_gain_fraction: float = 0.4    # of n_bs_rx
    comm_gain_fraction: float = 0.5  # of n_bs_rx

    # analog combiner design knobs
    epsilon_modulus: float = 0.3     # unit-modulus relaxation
    epsilon_step: float = 0.1        # per-iteration movement bound
    kappa2: float = 0.5              # init trade-off, 1 = pure communication
    block_fraction: float = 0.25     # entries optimized per BCD iteration
    bcd_max_iters: int = 200
    bcd_convergence_tol: float = 0.0

    # sensing
    initial_angle_error_std_deg: float = 1.0
    music_sources: int = 0  # assumed sources for MUSIC, 0 = MDL estimate

    # Monte Carlo
    n_trials: int = 20
    master_seed: int = 0

    def __post_init__(self):
        if min(self.n_bs_tx, self.n_bs_rx, self.n_ue, self.n_bs_rf, self.n_ue_rf) < 1:
            raise ContractViolationError("array and RF-chain counts must be positive")
        if self.n_dl_streams > self.n_ue_rf or self.n_ul_streams > self.n_ue_rf:
            raise ContractViolationError("stream count exceeds UE RF chains")
        if self.n_dl_users * self.n_dl_streams > self.n_bs_rf:
            raise ContractViolationError("total DL streams exceed BS RF chains")
        for name, frac in (("tx_gain_fraction", self.tx_gain_fraction),
                           ("rx_gain_fraction", self.rx_gain_fraction),
                           ("comm_gain_fraction", self.comm_gain_fraction)):
            if not 0.0 <= frac <= 1.0:
                raise ContractViolationError(f"{name} must be within [0, 1]")

    # unit conversions

    def numerology(self):
        return OfdmNumerology(
            n_subcarriers=self.n_subcarriers,
            n_symbols=self.n_symbols,
            subcarrier_spacing=self.subcarrier_spacing_hz,
            cp_duration=self.cp_duration_s,
            carrier_freq=self.carrier_freq_hz,
        )

    def dl_power(self):
        return dbm_to_watt(self.dl_power_dbm)

    def ul_power(self):
        return dbm_to_watt(self.ul_power_dbm)

    def noise_power_bs(self):
        return dbm_to_watt(self.noise_power_dbm)

    def noise_power_ue(self):
        return dbm_to_watt(self.noise_power_dbm)

    def si_power_ratio(self):
        return self.noise_power_bs() * db_to_linear(self.si_to_noise_db)

    def tx_gain_threshold(self):
        return self.tx_gain_fraction * math.sqrt(self.n_bs_tx)

    def rx_gain_threshold(self):
        return self.rx_gain_fraction * self.n_bs_rx

    def comm_gain_threshold(self):
        return self.comm_gain_fraction * self.n_bs_rx

    @property
    def target_angle_range(self):
        return tuple(math.radians(a) for a in self.target_angle_span_deg)

    @property
    def ue_angle_range(self):
        return tuple(math.radians(a) for a in self.ue_angle_span_deg)

    # serialization

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ContractViolationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("target_angle_span_deg", "target_range_span",
                    "target_speed_span", "ue_angle_span_deg"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def replace(self, **kwargs):
        return dataclasses.replace(self, **kwargs)


def desk_profile(**overrides):
    """Desk-scale default: 64-antenna arrays, 64 active subcarriers, 20 trials."""
    return SimConfig(**overrides)


def paper_profile(**overrides):
    """Full-scale profile: 792 active subcarriers, 100 trials."""
    base = dict(n_subcarriers=792, n_trials=100)
    base.update(overrides)
    return SimConfig(**base)


def sensing_off(cfg):
    """Variant without sensing requirements: no TX/RX radar gain constraints,
    communication gain threshold 0.7, combiner initialized purely for
    communication."""
    return cfg.replace(tx_gain_fraction=0.0, rx_gain_fraction=0.0,
                       comm_gain_fraction=0.7, kappa2=1.0)
