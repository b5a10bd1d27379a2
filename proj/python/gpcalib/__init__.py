"""GP trajectory regression for temporal and extrinsic calibration of position sensors.

Delays follow the sensor convention of the CLI report: a sensor-1 stamp equals
the matching sensor-2 stamp plus ``delay_s``. The lower-level
``estimate_delay`` works on an anchor/other pair where ``other = anchor + delay``.
"""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

__version__ = "0.1.0"
