"""Coordinate-free convolutional networks with explicit adjoints.

Feature stacks are float64 arrays of shape ``(depth, rows, cols)``.  The
layer, network and training modules build forward passes, adjoint
backpropagation and tangent-penalty gradients out of the operators in
:mod:`cfcnn.operators`; :mod:`cfcnn.verify` holds the independent oracles.
"""

from .linalg import (
    DimensionError,
    GeometryError,
    RangeError,
    axpy,
    feature_stack,
    frobenius_norm_sq,
    hadamard,
    inner,
)
from .network import ConfigError, NetworkSpec, NetworkState, final_layer, forward, forward_tangent, make_layer
from .operators import ConvGeometry, FilterBank, Nonlinearity
from .training import (
    GradientSet,
    Sample,
    TangentTarget,
    TrainConfig,
    descent_iteration,
    descent_step,
    grads_first_order,
    grads_higher_order,
    init_params,
    loss_J,
    loss_R,
    train,
)

__version__ = "0.1.0"
