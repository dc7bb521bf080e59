"""Camera-centric visual-inertial fusion: IMU preintegration, an
error-state EKF over ego-motion observations, warping-based photometric
losses, and a synthetic simulation harness to verify all of it."""

from dynafuse._kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = ["KERNEL_BACKEND", "__version__"]
