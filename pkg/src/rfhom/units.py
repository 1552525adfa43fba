"""Unit policy.

Rates and frequencies are angular (rad/ns) inside every formula; anything read
from or written to the outside world is cyclic (GHz) with times in ns or ps.
The 2*pi factor is applied only by the helpers below.
"""

import numpy as np

TWO_PI = 2.0 * np.pi
PS_PER_NS = 1000.0


class UnitConvention:
    """Boundary conversions between cyclic (GHz) and angular (rad/ns) units."""

    @staticmethod
    def to_angular(f_ghz):
        return TWO_PI * np.asarray(f_ghz, dtype=float) if np.ndim(f_ghz) else TWO_PI * float(f_ghz)

    @staticmethod
    def to_cyclic(w_rad_ns):
        return np.asarray(w_rad_ns, dtype=float) / TWO_PI if np.ndim(w_rad_ns) else float(w_rad_ns) / TWO_PI

    @staticmethod
    def ps_to_ns(t_ps):
        return np.asarray(t_ps, dtype=float) / PS_PER_NS if np.ndim(t_ps) else float(t_ps) / PS_PER_NS

    @staticmethod
    def ns_to_ps(t_ns):
        return np.asarray(t_ns, dtype=float) * PS_PER_NS if np.ndim(t_ns) else float(t_ns) * PS_PER_NS


to_angular = UnitConvention.to_angular
to_cyclic = UnitConvention.to_cyclic
