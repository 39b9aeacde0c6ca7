from ._lwvm import *  # noqa: F401,F403
from ._lwvm import __version__, __doc__  # noqa: F401
