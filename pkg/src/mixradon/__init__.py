"""Mixed j-plane to k-plane Radon transforms: radial closed forms, Monte Carlo and inversions."""

from mixradon.errors import RadonError
from mixradon.radial_transforms import Dims

__version__ = "0.1.0"

__all__ = ["Dims", "RadonError", "__version__"]
