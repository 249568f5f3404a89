#pragma once

// Builders for the operators used throughout the tests and experiments.

#include "refscale/pdo.hpp"

namespace refscale::systems {

/// Multiplication by c e^{i eta.x} (degree 0).
ClassicalSymbol multiplication(int n, Complex c, Mode eta = {0, 0});

/// -Laplacian, symbol |xi|^2; acts as 0 on constants.
ClassicalSymbol minus_laplacian(int n);

/// 1 - Laplacian, symbol |xi|^2 + 1.
ClassicalSymbol one_minus_laplacian(int n);

/// d/dx_axis, symbol i xi_axis.
ClassicalSymbol partial(int n, int axis);

/// Toeplitz shift on the circle: e_k -> e_{k+1} for k >= 0, e_k -> e_k for k < 0.
ClassicalSymbol shift_toeplitz();

PdoSystem identity_system(int n, int p);

/// [[d_1, -d_2], [d_2, d_1]] on the 2-torus.
PdoSystem cauchy_riemann();

/// [[-Laplacian, d_1], [d_1, 1]] on the 2-torus (not Petrovskii elliptic).
PdoSystem degenerate_mixed();

/// (1 - Laplacian) + eps e^{i x_1} d_1 on the 2-torus.
PdoSystem perturbed_helmholtz(double eps = 0.1);

}  // namespace refscale::systems
