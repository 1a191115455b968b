"""Sales conversation conversion prediction toolkit.

Synthetic conversation generation with known latent dynamics, sequential
state encoding, a small RL-refined probability estimator with confidence
estimation, and a low-latency guidance/serving pipeline.
"""

__version__ = "0.1.0"
