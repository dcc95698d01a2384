#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csg/types.hpp"

namespace csg {

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Reads a whole file; throws DataError naming the path when unreadable.
std::string read_text_file(const std::filesystem::path& path);

/// Writes via a temporary file and rename so readers never observe partial output.
void write_text_file_atomic(const std::filesystem::path& path, const std::string& contents);

/// Matrix with a `rows cols` header line followed by one row per line.
void write_matrix_text(const std::filesystem::path& path, const MatrixXd& m);
MatrixXd read_matrix_text(const std::filesystem::path& path);

/// One value per line.
void write_vector_text(const std::filesystem::path& path, const VectorXd& v);
VectorXd read_vector_text(const std::filesystem::path& path);
void write_int_vector_text(const std::filesystem::path& path, const VectorXi& v);
VectorXi read_int_vector_text(const std::filesystem::path& path);

}  // namespace csg
