"""Explain model adaptations by comparing contrastive explanations.

Submodules: ``data`` (datasets and generators), ``models`` (model families,
training, adaptation), ``counterfactuals``, ``diff`` (explanation
comparison), ``interest`` (sample ranking), ``persistence`` (constrained
adaptation), ``theory`` (linear-model identities) and ``cli``.
"""

__version__ = "0.1.0"
