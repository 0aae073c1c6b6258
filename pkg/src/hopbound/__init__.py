"""Statistical delay bounds and power optimization for multi-hop fading paths.

Submodules:
    special    incomplete gamma, O-QPSK BER, frame success probability
    mellin     SNR-domain arrival and service Mellin transforms
    kernel     delay-violation kernels, stability, bound inversion
    optimize   s-search, power minimization, lifetime maximization, baselines
    scenario   path loss, transceiver energy, batteries, scenario files
    sim        Monte-Carlo queue simulator and simulation-based refinement
    cli        command-line front end (hopbound <verb> ...)
"""

__version__ = "0.1.0"
