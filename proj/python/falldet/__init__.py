from ._falldet import *  # noqa: F401,F403
from ._falldet import __version__  # noqa: F401
