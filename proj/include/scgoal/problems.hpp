#pragma once

#include <string>

#include "scgoal/adaptive.hpp"

namespace scgoal {

/// Planar Fourier mode table: amplitude 0.547/m^2 and frequency pair of
/// increasing total order.
FourierMode fourier_mode(int m);

/// Coefficient with h0 = 1 and M Fourier modes under the given transform.
std::shared_ptr<CoefficientField> fourier_coefficient(Transform transform, int M,
                                                      double amplitude_scale = 1.0);

/// Benchmark problems 1..4. Initial meshes are loaded from the data directory
/// (see data_dir()).
ProblemDefinition setup(int id);

/// Location of the shipped mesh files; override with SCGOAL_DATA_DIR.
std::string data_dir();

// Initial mesh builders (also used to generate the shipped files).
Mesh build_square_mesh(double x0, double y0, double x1, double y1, int cells_per_side);
Mesh build_lshape_mesh(int cells_per_side);  // (-1,1)^2 minus the closed third quadrant
Mesh build_slit_mesh(double delta);          // (-1,1)^2 minus the thin triangle notch

struct ReferenceResult {
  double q_ref = 0.0;
  long long dofs = 0;
  std::string description;
};

/// Reference value on a strictly richer discretization: the final index set
/// plus its full margin, and P1 on two uniform refinements of the final mesh.
ReferenceResult reference_solve(const ProblemDefinition& problem, const AdaptiveState& state,
                                const RunConfig& config, int extra_refinements = 2);

}  // namespace scgoal
