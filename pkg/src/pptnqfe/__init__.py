"""Piecewise-polynomial feature maps encoded as low-rank tensor networks.

Submodules: ``basis`` (hat functions), ``mps`` (tensor trains),
``encoder`` (feature MPS), ``quantum_sim`` (statevector circuits),
``pde`` (Poisson pipeline), ``learning`` (regression), ``kernel``
(classification) and ``cli``.
"""

__version__ = "0.1.0"
