"""`thermogest` recognizes hand gestures in low-resolution thermal video."""
from typing import Final

import thermogest.version

__version__: Final[str] = thermogest.version.__version__
