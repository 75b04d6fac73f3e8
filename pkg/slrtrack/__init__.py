__version__ = 'v0.2.0'

from . import exceptions
from . import utilities
from . import linalg
from . import matio
from . import scenarios
from . import sparse
from . import batch
from . import trackers
from . import completion
from . import simulator
from . import loggers
from . import bench
from . import presets
