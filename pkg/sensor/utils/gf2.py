"""Dense GF(2) linear algebra on numpy uint8 matrices (XOR row operations)."""
import numpy as np
from utils.errors import NotInvertible


def gf2_row_echelon(matrix):
    """Reduced row-echelon form over GF(2). Returns (R, pivot_cols)."""
    reduced = (np.asarray(matrix, dtype=np.uint8) & 1).copy()
    rows, cols = reduced.shape
    pivot_cols = []
    pivot_row = 0

    for col in range(cols):
        if pivot_row == rows:
            break
        candidates = np.nonzero(reduced[pivot_row:, col])[0]
        if candidates.size == 0:
            continue
        found = pivot_row + candidates[0]
        if found != pivot_row:
            reduced[[pivot_row, found]] = reduced[[found, pivot_row]]

        # Clear the column everywhere else, above and below
        mask = reduced[:, col].astype(bool)
        mask[pivot_row] = False
        reduced[mask] ^= reduced[pivot_row]

        pivot_cols.append(col)
        pivot_row += 1

    return reduced, pivot_cols


def gf2_rank(matrix):
    _, pivot_cols = gf2_row_echelon(matrix)
    return len(pivot_cols)


def gf2_inverse(matrix):
    """Invert a square GF(2) matrix by Gauss-Jordan elimination on [M | I]."""
    square = np.asarray(matrix, dtype=np.uint8) & 1
    size = square.shape[0]
    if square.shape != (size, size):
        raise NotInvertible(f"matrix of shape {square.shape} is not square")

    augmented = np.concatenate([square, np.eye(size, dtype=np.uint8)], axis=1)
    reduced, pivot_cols = gf2_row_echelon(augmented)
    if pivot_cols[:size] != list(range(size)):
        raise NotInvertible(f"matrix has GF(2) rank {sum(1 for c in pivot_cols if c < size)} < {size}")
    return reduced[:, size:].copy()


def gf2_matvec(matrix, vector):
    return (np.asarray(matrix, dtype=np.uint8).astype(np.int64) @ np.asarray(vector, dtype=np.int64)) & 1


def int_to_bits(value, width):
    """Bit vector with element i = bit i of value."""
    return np.array([(value >> i) & 1 for i in range(width)], dtype=np.uint8)


def bits_to_int(bits):
    value = 0
    for i, bit in enumerate(bits):
        value |= int(bit) << i
    return value
