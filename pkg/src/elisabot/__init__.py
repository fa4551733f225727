"""Reminiscence-therapy dialogue engine.

Neural question generation over photo feature grids, a seq2seq feedback
chatbot, a session state machine, and an HTTP chat service, all built on a
small reverse-mode autodiff core with compiled recurrent-cell kernels.
"""

from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"
__all__ = ["KERNEL_BACKEND", "__version__"]
