"""Reconfiguration and turn-off policies as decision functions."""

from .base import (BlockTurnoff, Decision, DomainObservation, IntervalContext,
                   NewAllocation, NewConfig, NoChange, WaySetting, allocation_energy,
                   candidate_values, describe)
from .cashier import CashierState, cashier_msm, cashier_psm
from .dct import DctState, dct_observe, dct_tick
from .encache import EncacheParams, encache_esa, encache_estimates
from .manager import ManagerState, manager_esa
from .master import MasterParams, master_esa
from .palette import PaletteParams, palette_candidates, palette_esa
from .wac import WacState, wac_tick

POLICY_NAMES = ("none", "master", "palette", "encache", "cashier-msm", "cashier-psm",
                "manager", "dct", "wac")

__all__ = [
    "BlockTurnoff", "CashierState", "DctState", "Decision", "DomainObservation",
    "EncacheParams", "IntervalContext", "ManagerState", "MasterParams", "NewAllocation",
    "NewConfig", "NoChange", "POLICY_NAMES", "PaletteParams", "WacState", "WaySetting",
    "allocation_energy", "candidate_values", "cashier_msm", "cashier_psm", "dct_observe",
    "dct_tick", "describe", "encache_esa", "encache_estimates", "manager_esa", "master_esa",
    "palette_candidates", "palette_esa", "wac_tick",
]
