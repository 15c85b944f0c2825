"""An internal file with the version of the `thermogest` package."""
from typing import Final

#: the version string of `thermogest`
__version__: Final[str] = "0.1.0"
