"""Adversarial-example detection by label-conditioned synthesis.

The package splits into:

- ``core``        shared image/seed/dataset plumbing
- ``classifiers`` target models under attack
- ``synthesis``   encoder + conditional generator + training discriminators
- ``similarity``  the three rejectors and the fused detection verdict
- ``training``    the staged training procedure
- ``attacks``     white-box and detector-aware (adaptive) attacks
- ``evaluation``  metrics, threshold calibration, ROC/AUC, budget sweeps
- ``cli``         experiment orchestration
"""

__version__ = "0.1.0"
