"""Entropy-consistent constitutive model of a binary Korteweg-type mixture.

Submodules: :mod:`~kortmix.jet` (pointwise derivative jets),
:mod:`~kortmix.material` (scalar laws and admissibility),
:mod:`~kortmix.constitutive` (fluxes, stress, entropy),
:mod:`~kortmix.audit` (entropy-production verification),
:mod:`~kortmix.solver1d` (periodic 1-D solver) and :mod:`~kortmix.cli`.
"""

from .jet import StateJet
from .material import MaterialParams, check_admissibility
from .audit import run_identity_audit, sigma_closed, sigma_direct
from .config import RunConfig, parse_config

__all__ = ["StateJet", "MaterialParams", "check_admissibility", "run_identity_audit",
           "sigma_closed", "sigma_direct", "RunConfig", "parse_config"]
__version__ = "0.1.0"
