"""SPAM-robust zero-fidelity estimation.

Modules:

* :mod:`zerofid.qstate`: states, Pauli strings, SIC states, vectorization
* :mod:`zerofid.channel`: CPTP channels, superoperators, twirling
* :mod:`zerofid.circuit`: gates, noise models, exact and shot-level simulation
* :mod:`zerofid.fidelity`: process fidelity forms and the zero-fidelity
* :mod:`zerofid.rbfold`: Clifford tableaux, RB, identity folding, decay fits
* :mod:`zerofid.harness`: config-driven experiments and the command line
"""

__version__ = "0.1.0"
