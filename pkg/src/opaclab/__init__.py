"""Off-policy actor-critic lab: OPAC2, C-OPAC2, SAC and TD3 on small numpy networks."""
from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
