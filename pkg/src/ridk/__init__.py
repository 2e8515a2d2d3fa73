"""Numerical laboratory for regularised inertial Dean-Kawasaki dynamics.

Mixed discontinuous-Galerkin discretization of the coupled density/momentum
system on the torus, with Godunov wave fluxes, spectrally sampled correlated
noise, semi-implicit Euler-Maruyama stepping, positivity-preserving model
variants, and a Langevin particle simulator serving as microscopic oracle.
"""

__version__ = "0.1.0"
