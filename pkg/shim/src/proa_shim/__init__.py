"""Reference server exposing models over the newline-JSON wire protocol."""

from proa_shim.model import DenseNetwork, ModelLoadError, load_model, load_nnw
from proa_shim.server import WireServer

__all__ = ["DenseNetwork", "ModelLoadError", "WireServer", "load_model",
           "load_nnw"]
