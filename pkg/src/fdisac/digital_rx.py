"""Digital combining at the FD BS receiver.

One interference-plus-noise covariance per subcarrier drives both the
per-user LMMSE combiners and the per-subcarrier MVDR radar beamformer;
the covariance object caches its Cholesky factor so the expensive solve
is shared between the communication and radar paths.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .channel import array_response
from .errors import DegenerateSteeringError
from .linalg import cholesky


@dataclass
class UlInterferenceCovariance:
    """UL-signal-plus-noise covariance at the analog combiner output.

    ``matrix`` is Hermitian PD (the noise term guarantees it).  The
    Cholesky factor is computed on first use and cached; both the LMMSE
    and MVDR stages solve against the same factorization.
    """

    matrix: np.ndarray
    _factor: np.ndarray = field(default=None, repr=False)

    def solve(self, rhs):
        if self._factor is None:
            self._factor = cholesky(self.matrix)
        y = solve_triangular(self._factor, rhs, lower=True, check_finite=False)
        return solve_triangular(self._factor.conj().T, y, lower=False,
                                check_finite=False)


def ul_interference_covariance(analog_combiner, combined_ul_channels, ul_power,
                               noise_power):
    """Statistical covariance of UL signals plus combined noise, per subcarrier.

    ``combined_ul_channels[j, m]`` is W^H G V of user j at subcarrier m
    (N_rf x N_s).  The expression is the exact second moment for known
    precoded channels: sum_j (P_ul / N_s) T T^H + sigma^2 W^H W.
    """
    t = np.asarray(combined_ul_channels)
    n_rf = analog_combiner.shape[1]
    noise = noise_power * (analog_combiner.conj().T @ analog_combiner)
    if t.size == 0:
        n_sub = 1
        base = np.zeros((n_sub, n_rf, n_rf), dtype=np.complex128)
    else:
        n_streams = t.shape[-1]
        base = (ul_power / n_streams) * np.einsum("jmrs,jmps->mrp", t, t.conj())
    out = []
    for m in range(base.shape[0]):
        r = base[m] + noise
        out.append(UlInterferenceCovariance(matrix=0.5 * (r + r.conj().T)))
    return out


def lmmse_combiner(covariance, combined_channel):
    """LMMSE digital combiner for one UL user at one subcarrier.

    ``combined_channel`` is W^H G V (N_rf x N_s); the returned combiner is
    R^-1 W^H G V with R the shared covariance, which is the MMSE solution
    up to the per-stream symbol-power scale (irrelevant for the SINR).
    """
    return covariance.solve(combined_channel)


def mvdr_combiner(covariance, analog_combiner, target_angle):
    """MVDR radar beamformer at one subcarrier.

    Distortionless toward the reduced steering vector b = W^H a(theta):
    w = R^-1 b / (b^H R^-1 b), so w^H b = 1 exactly.
    """
    a = array_response(analog_combiner.shape[0], target_angle)
    b = analog_combiner.conj().T @ a
    if np.linalg.norm(b) < 1e-12 * np.sqrt(analog_combiner.shape[0]):
        raise DegenerateSteeringError(
            "analog combiner is orthogonal to the target steering vector"
        )
    rb = covariance.solve(b)
    denom = np.vdot(b, rb)
    return rb / denom
