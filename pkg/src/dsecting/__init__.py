"""D-secting families: verification, constructions, randomized search, exact solving and bounds."""

from .core import (
    BudgetError,
    ContractError,
    DSpec,
    Family,
    FamilyFormatError,
    FamilyKind,
    SubsetMask,
    VerifyResult,
    complement_members,
    dsects,
    dumps_family,
    generate_family,
    imbalance,
    loads_family,
    read_family,
    verify_dsecting,
    write_family,
)
from .solver import BetaResult, InfeasibleError, exact_beta, exact_discrepancy, induced_family

__version__ = "0.1.0"

__all__ = [
    "BudgetError",
    "ContractError",
    "DSpec",
    "Family",
    "FamilyFormatError",
    "FamilyKind",
    "SubsetMask",
    "VerifyResult",
    "complement_members",
    "dsects",
    "dumps_family",
    "generate_family",
    "imbalance",
    "loads_family",
    "read_family",
    "verify_dsecting",
    "write_family",
    "BetaResult",
    "InfeasibleError",
    "exact_beta",
    "exact_discrepancy",
    "induced_family",
]
