"""Simulation and verification suite for reversible birth-and-death
dynamics of finite-range interacting point processes.

Modules:
    geometry      windows, indexed configurations, point CSV round trips
    interactions  interaction specs, conditional energies, birth rates
    noise         counter-based seeds and shared proposal streams
    dynamics      trajectory construction, couplings, generator probes
    equilibrium   Gibbs sampling and balance-identity residuals
    lattice       exact finite-state oracle for entropy dissipation
    estimators    correlations, Janossy inversion, entropy and moment tests
    experiments   config-driven runs with manifests and verdicts
"""

__version__ = "0.1.0"
