"""Desk-scale emulator of a multi-UAV fleet network.

Simulated UAVs publish telemetry topics and execute service commands; a
link emulator shapes heterogeneous wireless profiles; a distance-vector
mesh carries swarm traffic; multi-protocol gateways masquerade flows onto
an uplink with ECMP-assisted handover; a data-processing/service layer
fans topics out to UI clients over a bridge protocol; an experiment
harness reproduces the reference measurements deterministically.
"""

__version__ = "0.1.0"
