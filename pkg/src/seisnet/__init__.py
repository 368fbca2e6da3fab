"""Desk-scale simulator for in-network seismic imaging on wireless sensor arrays.

Subpackages cover the full chain: earth models and synthetic sources
(:mod:`seisnet.model`), forward modeling (:mod:`seisnet.forward`), per-node
signal processing (:mod:`seisnet.sigproc`), travel-time tomography
(:mod:`seisnet.tomo`), decentralized solvers (:mod:`seisnet.consensus`),
the discrete-event network simulator (:mod:`seisnet.netsim`), migration
imaging (:mod:`seisnet.mmi`), ambient-noise imaging (:mod:`seisnet.ansi`),
pipeline orchestration (:mod:`seisnet.pipelines`), the HTTP control service
(:mod:`seisnet.service`) and the headless CLI (:mod:`seisnet.cli`).
"""

__version__ = "0.1.0"
