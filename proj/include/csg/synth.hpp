#pragma once

#include <cstdint>

#include "csg/mesh.hpp"

namespace csg {

struct Icosphere {
  Vertices vertices;  // unit length
  Faces faces;
};

/// Recursively subdivided icosahedron: 10 * 4^level + 2 vertices.
Icosphere icosphere(int level);

/// Smallest level whose vertex count reaches `min_vertices`.
int icosphere_level_for(int min_vertices);

struct SynthParams {
  std::uint64_t seed = 0;
  int n_vertices = 10242;
  int n_parcels = 32;
  /// Scale of the radial displacement field, in [0, 0.5].
  double deform_amplitude = 0.3;
  /// Largest rotation angle (degrees) of the random rigid pose given to each subject.
  double pose_jitter_deg = 0.0;
};

/// Labelled closed surface: a unit icosphere in a random tessellation frame, stretched into a
/// lopsided ellipsoid and displaced radially by a band-limited field (a shared population
/// component plus subject noise), then posed. Amplitude 0 gives the unit sphere.
/// Parcels are geodesic Voronoi cells of seeds placed by farthest-point sampling in the
/// canonical frame, so every subject shares the same parcel layout.
SurfaceMesh generate_synthetic_surface(const SynthParams& params);

inline SurfaceMesh generate_synthetic_surface(std::uint64_t seed, int n_vertices, int n_parcels,
                                              double deform_amplitude) {
  return generate_synthetic_surface(SynthParams{seed, n_vertices, n_parcels, deform_amplitude, 0.0});
}

/// Canonical parcel seed directions (unit vectors, one per row).
Eigen::Matrix<double, Eigen::Dynamic, 3> canonical_parcel_seeds(int n_parcels);

}  // namespace csg
