#include "csg/text_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "csg/error.hpp"

namespace csg {

namespace fs = std::filesystem;

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

namespace {

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    lines.push_back(line);
  }
  return lines;
}

double parse_double(const std::string& token, const fs::path& path, std::size_t line) {
  double value = 0.0;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": expected a number, got '" +
                    token + "'");
  }
  return value;
}

long parse_long(const std::string& token, const fs::path& path, std::size_t line) {
  long value = 0;
  const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
  if (result.ec != std::errc() || result.ptr != token.data() + token.size()) {
    throw DataError(path.string() + ":" + std::to_string(line) + ": expected an integer, got '" +
                    token + "'");
  }
  return value;
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

void write_matrix_text(const fs::path& path, const MatrixXd& m) {
  std::string out = std::to_string(m.rows()) + " " + std::to_string(m.cols()) + "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

MatrixXd read_matrix_text(const fs::path& path) {
  const auto lines = data_lines(read_text_file(path));
  if (lines.empty()) throw DataError(path.string() + ": empty matrix file");
  const auto header = tokens(lines[0]);
  if (header.size() != 2) throw DataError(path.string() + ":1: expected header 'rows cols'");
  const long rows = parse_long(header[0], path, 1);
  const long cols = parse_long(header[1], path, 1);
  if (rows < 0 || cols < 0) throw DataError(path.string() + ":1: negative dimensions");
  if (static_cast<long>(lines.size()) - 1 != rows) {
    throw DataError(path.string() + ": header announces " + std::to_string(rows) + " rows, found " +
                    std::to_string(lines.size() - 1));
  }
  MatrixXd m(rows, cols);
  for (long i = 0; i < rows; ++i) {
    const auto row = tokens(lines[i + 1]);
    if (static_cast<long>(row.size()) != cols) {
      throw DataError(path.string() + ":" + std::to_string(i + 2) + ": expected " +
                      std::to_string(cols) + " values");
    }
    for (long j = 0; j < cols; ++j) m(i, j) = parse_double(row[j], path, i + 2);
  }
  return m;
}

void write_vector_text(const fs::path& path, const VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += format_double(v[i]);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

VectorXd read_vector_text(const fs::path& path) {
  const auto lines = data_lines(read_text_file(path));
  VectorXd v(static_cast<Eigen::Index>(lines.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tok = tokens(lines[i]);
    if (tok.size() != 1) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected one value");
    v[static_cast<Eigen::Index>(i)] = parse_double(tok[0], path, i + 1);
  }
  return v;
}

void write_int_vector_text(const fs::path& path, const VectorXi& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    out += std::to_string(v[i]);
    out += '\n';
  }
  write_text_file_atomic(path, out);
}

VectorXi read_int_vector_text(const fs::path& path) {
  const auto lines = data_lines(read_text_file(path));
  VectorXi v(static_cast<Eigen::Index>(lines.size()));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto tok = tokens(lines[i]);
    if (tok.size() != 1) throw DataError(path.string() + ":" + std::to_string(i + 1) + ": expected one integer");
    v[static_cast<Eigen::Index>(i)] = static_cast<int>(parse_long(tok[0], path, i + 1));
  }
  return v;
}

}  // namespace csg
