"""Private map / secure reduce: node runtime plus deterministic simulator.

Computations move to the data: signed proposals disseminate over gossip,
every data holder gates them through its own privacy policy and runs the map
locally, and coordinator quorums aggregate protected contributions so only
threshold-gated aggregates are ever released.
"""

__version__ = "0.1.0"
