"""relearn-hvac: continual relearning of building dynamics models and a PPO
set-point controller for non-stationary HVAC systems.

The package is organized as a small numpy library:

- nn: dense/LSTM layers with hand-written BPTT, losses, Adam, serialization
- pipeline: CSV ingestion, cleaning, aggregation, scaling, windows, sequences
- synthetic: deterministic synthetic building-telemetry generator
- metrics: CVRMSE and rank-based ROC-AUC
- models: heating / valve / cooling dynamics models and their training loops
- env: exogenous-state building environment with the energy+comfort reward
- ppo: Gaussian-policy PPO with GAE and tanh action squashing
- orchestrator: weekly sliding-window relearning campaigns and reports
- cli: command-line entry points (relearn-hvac ...)
"""

__version__ = "0.1.0"
