"""Gaussian and alpha-stable random fields: simulation, kriging and linear extrapolation."""
from . import exceptions
from .covariance import *  # noqa: F401,F403
from .covariance import __all__ as _cov_all
from .exceptions import *  # noqa: F401,F403
from .extrapolation import *  # noqa: F401,F403
from .extrapolation import __all__ as _ext_all
from .kriging import *  # noqa: F401,F403
from .kriging import __all__ as _krig_all
from .measure import *  # noqa: F401,F403
from .measure import __all__ as _meas_all
from .simulate import *  # noqa: F401,F403
from .simulate import __all__ as _sim_all
from .stable import *  # noqa: F401,F403
from .stable import __all__ as _stable_all

__version__ = "0.1.0"

_exc_all = [n for n in dir(exceptions) if n[0].isupper()]
__all__ = sorted(set(_stable_all + _meas_all + _cov_all + _sim_all + _krig_all + _ext_all + _exc_all))
