"""Quantum policy gradient lab.

Exact statevector simulation of a data re-uploading circuit, policies
built from classically post-processed computational-basis measurements,
REINFORCE training on small benchmark tasks, and information-geometric
diagnostics (Fisher information spectrum, effective dimension) of the
resulting models.
"""

from . import analysis, ansatz, decode, envs, policy, qsim, train

__all__ = ["analysis", "ansatz", "decode", "envs", "policy", "qsim", "train"]
__version__ = "0.1.0"
