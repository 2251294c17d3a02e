"""Independent reference values, written without the package under test."""

import math

import numpy as np

SQ = 1 / math.sqrt(2)

# two-qubit Bell vectors in the |HT> order |00>, |01>, |10>, |11>
PSI_MINUS = np.array([0, SQ, -SQ, 0])
PSI_PLUS = np.array([0, SQ, SQ, 0])
PHI_MINUS = np.array([SQ, 0, 0, -SQ])
PHI_PLUS = np.array([SQ, 0, 0, SQ])

I2 = np.eye(2)
ISY = np.array([[0, 1], [-1, 0]])
SX = np.array([[0, 1], [1, 0]])
SZ = np.array([[1, 0], [0, -1]])


def h2(p: float) -> float:
    """Binary entropy by direct scalar evaluation."""
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def on_t(op, vec):
    """(I (x) op) vec on two qubits."""
    return np.kron(I2, op) @ vec
