"""Exact single-site heat-bath sampling of finite-volume Gibbs measures."""
from .chain import (ChainError, ChainResult, ChainState, CompiledModel, InvalidPartition, advance,
                    checkerboard_classes, conditional_logdensity, heatbath_update, initial_state,
                    model_hash, run_chain, sweep)

__all__ = [
    "ChainError", "ChainResult", "ChainState", "CompiledModel", "InvalidPartition", "advance",
    "checkerboard_classes", "conditional_logdensity", "heatbath_update", "initial_state",
    "model_hash", "run_chain", "sweep",
]
