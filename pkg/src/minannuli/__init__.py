"""Canonical minimal annular ends E_{a,b} from explicit Weierstrass data."""

__version__ = "0.1.0"

from .wdata import WeierstrassFamily  # noqa: E402
from .solver import SolveTarget, solve  # noqa: E402

__all__ = ["WeierstrassFamily", "SolveTarget", "solve", "__version__"]
