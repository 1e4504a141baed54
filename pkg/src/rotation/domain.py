from typing import Annotated

import numpy as np
from pydantic import Field

# Quaternions are numpy arrays ordered scalar first: (q1, q2, q3, q4) = q1 + q2 i + q3 j + q4 k.
# Batches are arrays of shape (N, 4). Rotation axes and tangent vectors are (3,) arrays.
Quaternion = np.ndarray
RotationAxis = np.ndarray
TangentVector = np.ndarray

# Serialised form used by every JSON record of the package.
QuaternionList = Annotated[list[float], Field(min_length=4, max_length=4)]
Vector3List = Annotated[list[float], Field(min_length=3, max_length=3)]

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

UNIT_TOLERANCE = 1e-6
AXIS_EPSILON = 1e-6
ROTATION_TOLERANCE = 1e-6
LOG_BOUNDARY_TOLERANCE = 1e-9
# |2<q, q'>^2 - 1| is capped here when differentiating the rotation loss.
LOSS_GRADIENT_CAP = 1.0 - 1e-7
