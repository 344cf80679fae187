"""Implicit inverse force identification for coupled structural-acoustic systems.

Core pipeline: a (u, p) coupled finite-element model (:mod:`system_model`)
is reduced with a strongly coupled modal basis (:mod:`rom`), integrated
with Newmark-beta (:mod:`newmark`), and inverted step by step with a
Tikhonov-regularized least-squares update (:mod:`inverse`). An augmented
Kalman filter (:mod:`akf`) serves as the comparison baseline, and
:mod:`metrics` provides Geers error measures and measurement noise.
"""

__version__ = "0.1.0"
