"""Cellular-connected UAV navigation laboratory.

Synthesizes an urban radio environment (ITU building field, sectorized
uniform linear arrays, ground-to-air pathloss), estimates transmission
outage statistics by Monte Carlo, and trains a duelling double-DQN agent
whose replay sampling is governed by a quantum-inspired priority buffer,
with uniform and proportional-prioritized replay baselines.
"""

__version__ = "0.1.0"
