# src/engine/types.py
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

# Samples are rows. Everything numeric is float64.
Matrix = NDArray[np.float64]
Vector = NDArray[np.float64]
Labels = NDArray[np.int64]
Indices = NDArray[np.int64]
