#pragma once

// System definition files (YAML; JSON is accepted as a subset).
//
//   n: 2
//   p: 2
//   entries:
//     - row: 0
//       col: 0
//       zero_mode: principal_direction      # vanish | explicit
//       zero_mode_coeffs: [[[0, 0], 1, 0]]  # explicit only: [eta, re, im]
//       terms:
//         - degree: 1
//           cutoff_radius: 1                 # optional
//           coeff: [[[0, 0], 1, 0]]          # [eta, re, im]; eta is an integer on the circle
//           angular: [[1, 0, 0.5], [-1, 0, 0.5]]
//
// `angular` lists (sigma(+1) / sigma(-1)) as [+1, re, im] and [-1, re, im] on
// the circle, and angle modes [m, re, im] on the 2-torus; omitted means 1.
// Terms of equal degree in one entry add up.

#include <string>

#include "refscale/pdo.hpp"

namespace refscale {

/// Throws ParseError with the line and field of the first problem.
PdoSystem parse_system(const std::string& text);
PdoSystem load_system(const std::string& path);

/// Order matrix as text rows, "-inf" for zero entries, followed by m_k.
std::string describe_orders(const PdoSystem& A);

}  // namespace refscale
