"""Heat-kernel traces and the bosonic spectral action on flat tori,
realized through an Evans-Hudson quantum stochastic flow on boson Fock
space over L2 one-forms.

Layer map:

* ``spectral``  exact trigonometric-polynomial calculus on T^d
* ``structure`` the flow's structure maps (L, delta, delta-dagger, theta)
* ``fock``      truncated symmetric Fock space over the noise space
* ``flow``      the quantum stochastic flow: matrix elements, Picard
                iteration, time-ordered exponentials, Fock-side engine
* ``trace``     heat traces, theta-function cross-checks, spectral action
* ``cli``       the ``torusflow`` command line front end
"""

from .errors import (
    BasisDeficient,
    BasisMismatch,
    CapExceeded,
    ConfigInvalid,
    DepthExceeded,
    GeometryMismatch,
    IoFailure,
    NotPositive,
    RankMismatch,
    TorusFlowError,
)

__all__ = [
    "BasisDeficient",
    "BasisMismatch",
    "CapExceeded",
    "ConfigInvalid",
    "DepthExceeded",
    "GeometryMismatch",
    "IoFailure",
    "NotPositive",
    "RankMismatch",
    "TorusFlowError",
]

__version__ = "0.1.0"
