"""Disturbance and compatibility of finite-dimensional quantum observables.

The central quantity is ``D_A(B)``, the least worst-case change any
instrument implementing ``A`` must inflict on the expectation values of
``B``. It is computed by a semidefinite program whose dual solution is
returned as an independently checkable certificate.
"""

from importlib.resources import files

from .disturbance import (
    Certificate,
    CertificateError,
    DisturbanceReport,
    JointMeasurabilityReport,
    SolverFailure,
    check_primal,
    decide_non_disturbance,
    disturbance_measure,
    first_kind_measure,
    joint_measurability,
    rank1_disturbance,
    verify_dual_certificate,
)
from .instruments import (
    Channel,
    Instrument,
    fixed_point_space,
    fixed_state_space,
    full_rank_fixed_state,
    induced_observable,
    is_first_kind,
    is_repeatable,
    luders,
    total_channel,
    trash_and_prepare,
)
from .observables import (
    JointObservable,
    Observable,
    coarse_grain_pair,
    commutes,
    is_sharp,
    smear,
    span_dim,
    two_outcome_joint,
    validate,
)

__version__ = "0.1.0"


def data_path(name: str):
    """Path to a shipped example document."""
    return files(__name__) / "data" / name
