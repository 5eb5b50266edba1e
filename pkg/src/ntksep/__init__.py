"""Exact desk-scale experiments comparing gradient descent on specialized
differentiable models with tangent-kernel and general kernel predictors on
sparse-parity style problems over the Boolean hypercube."""

__version__ = "0.1.0"
