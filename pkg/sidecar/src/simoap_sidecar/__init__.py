"""Reference server exposing generation/scoring models behind the reranking
wire protocol (next-token-dist, batch-sample, loglikelihood, nli).

Built-in models keep the server runnable offline; Hugging Face adapters load
real checkpoints when configured.
"""

from .config import ModelBinding, SidecarConfig
from .server import create_app, serve

__version__ = "0.1.0"

__all__ = ["ModelBinding", "SidecarConfig", "create_app", "serve"]
