"""States, tensor products, Schmidt structure, and Bloch directions.

Superposing basis states steers a qubit around the Bloch ball: summing and
subtracting "up" and "down" gives "right" and "left", and the same
combinations with an imaginary unit give "front" and "back". Entangled
vectors, by contrast, have no local direction at all: their marginals are
mixed, which the Schmidt coefficients and partial trace make visible.
"""

import numpy as np

from onticsim import (
    bloch_coordinates,
    partial_trace,
    schmidt_decompose,
    tensor_product,
)

up = np.array([1, 0], dtype=complex)
down = np.array([0, 1], dtype=complex)

print("== single-qubit directions ==")
for label, state in [
    ("up            ", up),
    ("down          ", down),
    ("up + down     ", (up + down) / np.sqrt(2)),
    ("up - down     ", (up - down) / np.sqrt(2)),
    ("up + i down   ", (up + 1j * down) / np.sqrt(2)),
    ("up - i down   ", (up - 1j * down) / np.sqrt(2)),
]:
    x, y, z = bloch_coordinates(state)
    print(f"  {label} -> bloch ({x:+.3f}, {y:+.3f}, {z:+.3f})")

print("\n== products stay separable ==")
product = tensor_product(up.reshape(2, 1), ((up + down) / np.sqrt(2)).reshape(2, 1)).ravel()
coeffs, _, _ = schmidt_decompose(product, (2, 2))
print(f"  |0>|+>           Schmidt coefficients: {np.round(coeffs, 6)}")

print("\n== entangled pairs have no local direction ==")
bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
coeffs, _, _ = schmidt_decompose(bell, (2, 2))
print(f"  (|00>+|11>)/sqrt2 Schmidt coefficients: {np.round(coeffs, 6)}")
rho = np.outer(bell, bell.conj())
marginal = partial_trace(rho, (2, 2), keep=[0])
print(f"  left marginal:\n{np.round(marginal.real, 3)}")
print(f"  marginal purity Tr(rho^2) = {np.trace(marginal @ marginal).real:.3f}  (pure would be 1)")
