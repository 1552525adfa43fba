"""Dual-color two-photon interference of resonance fluorescence.

Closed-form models, independent numerical oracles, a synthetic-data and
fitting layer, and a command-line front end.
"""

__version__ = "0.1.0"

from .emitter import (  # noqa: E402
    AtomState,
    DriveParams,
    EmitterParams,
    JointPureState,
    device_figures,
    g1_magnitude_steady,
    g1_window,
    joint_state,
    m_bound_from_g1,
    p0_from_flux,
    saturation_parameter,
    saturation_weights,
    steady_state,
)
from .interference import (  # noqa: E402
    CorrelationTrace,
    HomParams,
    ParametricG2,
    TabulatedG2,
    combine_hbt_geometric,
    g2_hom_full,
    g2_hom_measured_model,
    g2_hom_side_feature,
    g2_hom_single_photon,
    g2_hom_steady,
    visibility,
)
