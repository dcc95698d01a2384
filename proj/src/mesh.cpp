#include "csg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "csg/error.hpp"
#include "csg/text_io.hpp"

namespace csg {

namespace fs = std::filesystem;

MeshFormat parse_mesh_format(std::string_view name) {
  if (name == "off") return MeshFormat::off;
  if (name == "ply" || name == "ply-ascii" || name == "ply_ascii") return MeshFormat::ply_ascii;
  if (name == "internal") return MeshFormat::internal;
  throw UsageError("unknown mesh format '" + std::string(name) + "'");
}

std::vector<Edge> unique_edges(const Faces& faces) {
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(faces.rows()) * 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      const int a = faces(f, c);
      const int b = faces(f, (c + 1) % 3);
      edges.push_back({std::min(a, b), std::max(a, b)});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::vector<std::vector<int>> vertex_neighbors(int num_vertices, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> nbrs(static_cast<std::size_t>(num_vertices));
  for (const auto& [a, b] : edges) {
    nbrs[a].push_back(b);
    nbrs[b].push_back(a);
  }
  for (auto& list : nbrs) std::sort(list.begin(), list.end());
  return nbrs;
}

std::vector<int> connected_component_sizes(int num_vertices, const std::vector<Edge>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(num_vertices));
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (const auto& [a, b] : edges) {
    const int ra = find(a);
    const int rb = find(b);
    if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
  }
  std::vector<int> count(static_cast<std::size_t>(num_vertices), 0);
  for (int v = 0; v < num_vertices; ++v) ++count[find(v)];
  std::vector<int> sizes;
  for (int c : count) {
    if (c > 0) sizes.push_back(c);
  }
  std::sort(sizes.rbegin(), sizes.rend());
  return sizes;
}

void validate_mesh(const SurfaceMesh& mesh) {
  const int n = mesh.num_vertices();
  if (n == 0) throw DataError("mesh has no vertices");
  if (!mesh.vertices.allFinite()) throw DataError("mesh has non-finite vertex coordinates");
  for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    for (int idx : {a, b, c}) {
      if (idx < 0 || idx >= n) {
        throw DataError("face " + std::to_string(f) + " references vertex " + std::to_string(idx) +
                        " but the mesh has " + std::to_string(n) + " vertices");
      }
    }
    if (a == b || b == c || a == c) {
      throw DataError("face " + std::to_string(f) + " is degenerate (repeated vertex index)");
    }
  }
  const auto sizes = connected_component_sizes(n, unique_edges(mesh.faces));
  if (sizes.size() > 1) {
    std::string list;
    for (std::size_t i = 0; i < sizes.size() && i < 10; ++i) {
      if (i) list += ", ";
      list += std::to_string(sizes[i]);
    }
    if (sizes.size() > 10) list += ", ...";
    throw DataError("mesh is disconnected: " + std::to_string(sizes.size()) +
                    " components with sizes [" + list + "]");
  }
  if (mesh.sulcal_depth.size() != n) {
    throw DataError("sulcal depth has " + std::to_string(mesh.sulcal_depth.size()) +
                    " entries for " + std::to_string(n) + " vertices");
  }
  if (!mesh.sulcal_depth.allFinite()) throw DataError("sulcal depth has non-finite entries");
  if (mesh.has_labels() && mesh.labels.size() != n) {
    throw DataError("labels have " + std::to_string(mesh.labels.size()) + " entries for " +
                    std::to_string(n) + " vertices");
  }
}

namespace {

// Whitespace tokenizer that skips '#' comments and tracks line numbers.
class TokenStream {
 public:
  TokenStream(const std::string& text, fs::path path) : path_(std::move(path)) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      std::string tok;
      std::vector<std::string> row;
      while (ls >> tok) row.push_back(tok);
      if (!row.empty()) lines_.push_back({lineno, std::move(row)});
    }
  }

  bool at_end() const { return line_ >= lines_.size(); }

  // Remaining tokens of the current line; advances to the next line.
  std::vector<std::string> next_line() {
    if (at_end()) fail("unexpected end of file");
    auto row = lines_[line_].second;
    row.erase(row.begin(), row.begin() + static_cast<long>(pos_));
    ++line_;
    pos_ = 0;
    return row;
  }

  std::string next() {
    if (at_end()) fail("unexpected end of file");
    std::string tok = lines_[line_].second[pos_];
    if (++pos_ == lines_[line_].second.size()) {
      ++line_;
      pos_ = 0;
    }
    return tok;
  }

  double next_double() {
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail("expected a number, got '" + tok + "'");
    }
  }

  long next_long() {
    const std::string tok = next();
    try {
      std::size_t used = 0;
      const long v = std::stol(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
      return v;
    } catch (const std::exception&) {
      fail("expected an integer, got '" + tok + "'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    const std::size_t lineno = at_end() ? (lines_.empty() ? 0 : lines_.back().first) : lines_[line_].first;
    throw DataError(path_.string() + ":" + std::to_string(lineno) + ": " + what);
  }

 private:
  fs::path path_;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> lines_;
  std::size_t line_ = 0;
  std::size_t pos_ = 0;
};

void read_face(TokenStream& ts, Faces& faces, long f) {
  const long count = ts.next_long();
  if (count != 3) ts.fail("only triangular faces are supported (face has " + std::to_string(count) + " vertices)");
  for (int c = 0; c < 3; ++c) faces(f, c) = static_cast<int>(ts.next_long());
}

SurfaceMesh read_off(const fs::path& path) {
  TokenStream ts(read_text_file(path), path);
  std::string magic = ts.next();
  if (magic.rfind("OFF", 0) != 0) ts.fail("missing OFF header");
  // Counts may follow the keyword on the same line ("OFF 4 4 6").
  if (magic.size() > 3) ts.fail("unsupported OFF variant '" + magic + "'");
  const long nv = ts.next_long();
  const long nf = ts.next_long();
  ts.next_long();  // edge count, unused
  if (nv < 0 || nf < 0) ts.fail("negative element count");
  SurfaceMesh mesh;
  mesh.vertices.resize(nv, 3);
  for (long v = 0; v < nv; ++v) {
    for (int c = 0; c < 3; ++c) mesh.vertices(v, c) = ts.next_double();
  }
  mesh.faces.resize(nf, 3);
  for (long f = 0; f < nf; ++f) read_face(ts, mesh.faces, f);
  return mesh;
}

SurfaceMesh read_ply_ascii(const fs::path& path) {
  TokenStream ts(read_text_file(path), path);
  if (ts.next_line() != std::vector<std::string>{"ply"}) ts.fail("missing 'ply' magic");
  struct Element {
    std::string name;
    long count = 0;
    std::vector<std::string> properties;
  };
  std::vector<Element> elements;
  bool ascii = false;
  for (;;) {
    const auto row = ts.next_line();
    if (row[0] == "end_header") break;
    if (row[0] == "format") {
      if (row.size() < 2 || row[1] != "ascii") ts.fail("only ASCII PLY is supported");
      ascii = true;
    } else if (row[0] == "element") {
      if (row.size() != 3) ts.fail("malformed element line");
      elements.push_back({row[1], std::stol(row[2]), {}});
    } else if (row[0] == "property") {
      if (elements.empty()) ts.fail("property before element");
      elements.back().properties.push_back(row.back());
    } else if (row[0] != "comment" && row[0] != "obj_info") {
      ts.fail("unknown header keyword '" + row[0] + "'");
    }
  }
  if (!ascii) ts.fail("missing format line");

  SurfaceMesh mesh;
  bool have_vertices = false;
  bool have_faces = false;
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      std::array<int, 3> slot{-1, -1, -1};
      for (std::size_t p = 0; p < el.properties.size(); ++p) {
        if (el.properties[p] == "x") slot[0] = static_cast<int>(p);
        if (el.properties[p] == "y") slot[1] = static_cast<int>(p);
        if (el.properties[p] == "z") slot[2] = static_cast<int>(p);
      }
      if (slot[0] < 0 || slot[1] < 0 || slot[2] < 0) ts.fail("vertex element lacks x/y/z");
      mesh.vertices.resize(el.count, 3);
      for (long v = 0; v < el.count; ++v) {
        const auto row = ts.next_line();
        if (row.size() < el.properties.size()) ts.fail("short vertex line");
        for (int c = 0; c < 3; ++c) {
          try {
            mesh.vertices(v, c) = std::stod(row[static_cast<std::size_t>(slot[c])]);
          } catch (const std::exception&) {
            ts.fail("bad vertex coordinate");
          }
        }
      }
      have_vertices = true;
    } else if (el.name == "face") {
      mesh.faces.resize(el.count, 3);
      for (long f = 0; f < el.count; ++f) read_face(ts, mesh.faces, f);
      have_faces = true;
    } else {
      for (long i = 0; i < el.count; ++i) ts.next_line();
    }
  }
  if (!have_vertices || !have_faces) ts.fail("PLY file needs vertex and face elements");
  return mesh;
}

}  // namespace

SurfaceMesh load_mesh(const fs::path& path, MeshFormat format) {
  SurfaceMesh mesh;
  switch (format) {
    case MeshFormat::off:
      mesh = read_off(path);
      break;
    case MeshFormat::ply_ascii:
      mesh = read_ply_ascii(path);
      break;
    case MeshFormat::internal: {
      mesh = read_off(path / "mesh.off");
      const auto n = mesh.vertices.rows();
      mesh.sulcal_depth = read_vector_text(path / "sulc.txt");
      if (mesh.sulcal_depth.size() != n) {
        throw DataError((path / "sulc.txt").string() + ": " + std::to_string(mesh.sulcal_depth.size()) +
                        " lines for " + std::to_string(n) + " vertices");
      }
      if (fs::exists(path / "labels.txt")) {
        mesh.labels = read_int_vector_text(path / "labels.txt");
        if (mesh.labels.size() != n) {
          throw DataError((path / "labels.txt").string() + ": " + std::to_string(mesh.labels.size()) +
                          " lines for " + std::to_string(n) + " vertices");
        }
      }
      break;
    }
  }
  if (mesh.sulcal_depth.size() == 0) mesh.sulcal_depth = VectorXd::Zero(mesh.vertices.rows());
  validate_mesh(mesh);
  return mesh;
}

void write_off(const fs::path& path, const SurfaceMesh& mesh) {
  std::string out = "OFF\n" + std::to_string(mesh.num_vertices()) + " " + std::to_string(mesh.num_faces()) +
                    " " + std::to_string(unique_edges(mesh.faces).size()) + "\n";
  for (int v = 0; v < mesh.num_vertices(); ++v) {
    out += format_double(mesh.vertices(v, 0)) + " " + format_double(mesh.vertices(v, 1)) + " " +
           format_double(mesh.vertices(v, 2)) + "\n";
  }
  for (int f = 0; f < mesh.num_faces(); ++f) {
    out += "3 " + std::to_string(mesh.faces(f, 0)) + " " + std::to_string(mesh.faces(f, 1)) + " " +
           std::to_string(mesh.faces(f, 2)) + "\n";
  }
  write_text_file_atomic(path, out);
}

void save_subject(const fs::path& dir, const SurfaceMesh& mesh) {
  fs::create_directories(dir);
  write_off(dir / "mesh.off", mesh);
  write_vector_text(dir / "sulc.txt", mesh.sulcal_depth);
  if (mesh.has_labels()) {
    write_int_vector_text(dir / "labels.txt", mesh.labels);
  } else {
    write_int_vector_text(dir / "labels.txt", VectorXi::Constant(mesh.num_vertices(), kUnlabeled));
  }
}

double mesh_diameter(const SurfaceMesh& mesh) {
  const auto& v = mesh.vertices;
  double best = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < v.rows(); ++j) {
      best = std::max(best, (v.row(i) - v.row(j)).squaredNorm());
    }
  }
  return std::sqrt(best);
}

}  // namespace csg
