"""Audio-visual alignment toolkit.

Optimal-transport patch alignment, attention-consistency losses over box
masks, grounding codecs and metrics, plus a synthetic training harness,
all backed by a small reverse-mode tape and brute-force oracles.
"""

from avalign.tensor import Tensor, Tape, backward, finite_difference_gradient

__version__ = "0.1.0"

__all__ = ["Tensor", "Tape", "backward", "finite_difference_gradient", "__version__"]
