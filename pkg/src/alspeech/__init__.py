"""Two-stage active-learning data selection for speech transcription:
cluster-based cold start plus committee-disagreement batch acquisition,
with baselines, a simulation harness, and an annotation loop.
"""

__version__ = "0.1.0"
