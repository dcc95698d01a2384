#pragma once

#include <array>
#include <filesystem>
#include <string_view>
#include <vector>

#include "csg/types.hpp"

namespace csg {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3>;
/// Undirected edge with first < second.
using Edge = std::array<int, 2>;

struct SurfaceMesh {
  Vertices vertices;          // mm
  Faces faces;
  VectorXd sulcal_depth;      // z-scored, one entry per vertex
  VectorXi labels;            // empty, or one parcel id per vertex (kUnlabeled allowed)

  int num_vertices() const { return static_cast<int>(vertices.rows()); }
  int num_faces() const { return static_cast<int>(faces.rows()); }
  bool has_labels() const { return labels.size() > 0; }
};

enum class MeshFormat { off, ply_ascii, internal };

MeshFormat parse_mesh_format(std::string_view name);

/// Sorted list of the distinct undirected edges of a triangulation.
std::vector<Edge> unique_edges(const Faces& faces);

/// Sorted 1-ring neighbour lists.
std::vector<std::vector<int>> vertex_neighbors(int num_vertices, const std::vector<Edge>& edges);

/// Sizes of the connected components, largest first.
std::vector<int> connected_component_sizes(int num_vertices, const std::vector<Edge>& edges);

/// Checks index ranges, degenerate faces, connectivity and channel sizes; throws DataError.
void validate_mesh(const SurfaceMesh& mesh);

/// Loads a mesh file (off, ply_ascii) or a subject directory (internal). Geometry-only
/// formats get an all-zero sulcal channel and no labels.
SurfaceMesh load_mesh(const std::filesystem::path& path, MeshFormat format);

void write_off(const std::filesystem::path& path, const SurfaceMesh& mesh);

/// Writes the internal subject layout: mesh.off, sulc.txt, labels.txt.
void save_subject(const std::filesystem::path& dir, const SurfaceMesh& mesh);

/// Largest pairwise vertex distance.
double mesh_diameter(const SurfaceMesh& mesh);

}  // namespace csg
