"""Single-user SVD transceivers at the UEs.

DL UEs combine with the leading left singular vectors of their own
channel, UL UEs precode with the leading right singular vectors; both are
then squeezed through the same greedy hybrid factorization used at the
base station, since UEs also carry a phase-shifter analog stage.
MU interference suppression is deliberately absent: UEs only know their
own channels.
"""

import numpy as np

from .linalg import svd
from .precoding import hybrid_factorize


def dl_combiner(channels, n_streams, n_rf):
    """Hybrid combiner of one DL UE.

    ``channels`` is (M, N_ue, N_bs_tx).  Per-subcarrier targets are the
    first ``n_streams`` left singular vectors; the hybrid factorization
    renormalizes so trace(W^H W) = n_streams on every subcarrier.

    Returns the composed combiners, shape (M, N_ue, n_streams).
    """
    n_sub = channels.shape[0]
    targets = np.zeros((1, n_sub, channels.shape[1], n_streams), dtype=np.complex128)
    for m in range(n_sub):
        u, _, _ = svd(channels[m])
        targets[0, m] = u[:, :n_streams]
    hybrid, _ = hybrid_factorize(targets, n_rf)
    return hybrid.compose_all()[0]


def ul_precoder(channels, n_streams, n_rf):
    """Hybrid precoder of one UL UE.

    ``channels`` is (M, N_bs_rx, N_ue).  The fully digital targets are the
    leading right singular vectors of the channel (the precoder lives on
    the UE side of G), factorized and power-normalized per subcarrier.

    Returns the composed precoders, shape (M, N_ue, n_streams).
    """
    n_sub = channels.shape[0]
    targets = np.zeros((1, n_sub, channels.shape[2], n_streams), dtype=np.complex128)
    for m in range(n_sub):
        _, _, v = svd(channels[m])
        targets[0, m] = v[:, :n_streams]
    hybrid, _ = hybrid_factorize(targets, n_rf)
    return hybrid.compose_all()[0]
