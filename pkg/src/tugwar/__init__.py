"""Tug-of-war with noise as a numerical lab for p-harmonic functions and measures.

Modules: ``geometry`` (domains), ``boundary`` (boundary sets and payoffs),
``game`` (rules and simulator), ``strategies``, ``solver`` (DPP value
iteration), ``estimator`` (Monte Carlo and measure experiments), ``oracles``
(closed forms) and ``cli``.
"""
__version__ = "0.1.0"
