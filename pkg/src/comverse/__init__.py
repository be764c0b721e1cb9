"""Comverse: a federative-by-design community platform.

Each node (fedlet) pairs a control plane (fedctl: identity, membership,
tokens, RBAC) with a data plane (fedcore: objects, views, sync, secure
aggregation), driven either by the deterministic in-process simnet or a real
HTTP binding.
"""

__version__ = "0.1.0"

from comverse.errors import ComverseError
from comverse.fedlet import Fedlet, FedletConfig
from comverse.identity import FedId, KeyPair

__all__ = ["ComverseError", "Fedlet", "FedletConfig", "FedId", "KeyPair", "__version__"]
