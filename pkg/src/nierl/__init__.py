"""Learning binary causal variables and their manipulation policies in RL
by maximizing the natural indirect effect instead of the expected return."""

from . import causal, envs, harness, learner, mdp, nn, values, vtrace

__all__ = ["causal", "envs", "harness", "learner", "mdp", "nn", "values", "vtrace"]
__version__ = "0.1.0"
