"""Link-level simulator for integrated monostatic sensing and full-duplex
multiuser mmWave communication.

Subpackage map:
  linalg           complex linear-algebra and transform kernels
  channel          geometric channel models and scenario draws
  precoding        SLNR hybrid precoders at the FD base station
  ue               SVD transceivers at the user equipments
  analog_combiner  SI-minimizing analog combiner (block coordinate descent)
  digital_rx       LMMSE and MVDR digital combining
  sensing          beamspace MUSIC and OFDM radar processing
  metrics          spectral efficiency and residual-SI figures of merit
  config, harness  Monte Carlo configuration and orchestration
  report, cli      delimited output, figures, command line
"""

__version__ = "0.1.0"
