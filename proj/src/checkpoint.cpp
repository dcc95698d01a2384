#include "csg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <json.hpp>

#include "csg/error.hpp"
#include "csg/text_io.hpp"

namespace csg {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes little-endian hosts");

namespace {

constexpr char kMagic[4] = {'C', 'S', 'G', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, T value) {
  char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  out.append(raw, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw DataError("truncated checkpoint");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

// Visits every scalar of a layer in serialization order.
template <typename Layer, typename Fn>
void for_each_value(Layer& layer, Fn&& fn) {
  for (int p = 0; p < layer.out_dim(); ++p) {
    for (int q = 0; q < layer.in_dim(); ++q) {
      for (int k = 0; k < layer.kernels(); ++k) fn(layer.weights(k * layer.in_dim() + q, p));
    }
  }
  for (Eigen::Index p = 0; p < layer.bias.size(); ++p) fn(layer.bias[p]);
  for (Eigen::Index k = 0; k < layer.mu.rows(); ++k) {
    for (Eigen::Index c = 0; c < layer.mu.cols(); ++c) fn(layer.mu(k, c));
  }
  for (Eigen::Index k = 0; k < layer.log_sigma.size(); ++k) fn(layer.log_sigma[k]);
}

std::vector<LayerParams> empty_layers(const NetworkConfig& config) {
  std::vector<LayerParams> layers;
  int in = config.input_dim;
  for (int out : config.layer_widths()) {
    layers.push_back(LayerParams::zeros(in, out, config.kernels, config.embed_dim));
    in = out;
  }
  return layers;
}

std::string encode_binary(const NetworkParams& params) {
  const NetworkConfig& c = params.config;
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::int32_t>(out, c.input_dim);
  put<std::int32_t>(out, static_cast<std::int32_t>(c.hidden.size()));
  for (int h : c.hidden) put<std::int32_t>(out, h);
  put<std::int32_t>(out, c.num_classes);
  put<std::int32_t>(out, c.kernels);
  put<std::int32_t>(out, c.embed_dim);
  put<double>(out, c.leaky_slope);
  put<std::uint64_t>(out, c.seed);
  for (const auto& layer : params.layers) for_each_value(layer, [&](double v) { put<double>(out, v); });
  return out;
}

NetworkParams decode_binary(const std::string& bytes) {
  Reader in(bytes);
  for (char m : kMagic) {
    if (in.get<char>() != m) throw DataError("not a checkpoint (bad magic)");
  }
  if (const auto version = in.get<std::uint32_t>(); version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  NetworkParams params;
  NetworkConfig& c = params.config;
  c.input_dim = in.get<std::int32_t>();
  const int n_hidden = in.get<std::int32_t>();
  if (n_hidden < 0 || n_hidden > 64) throw DataError("corrupt checkpoint header");
  c.hidden.resize(static_cast<std::size_t>(n_hidden));
  for (auto& h : c.hidden) h = in.get<std::int32_t>();
  c.num_classes = in.get<std::int32_t>();
  c.kernels = in.get<std::int32_t>();
  c.embed_dim = in.get<std::int32_t>();
  c.leaky_slope = in.get<double>();
  c.seed = in.get<std::uint64_t>();
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  params.layers = empty_layers(c);
  for (auto& layer : params.layers) for_each_value(layer, [&](double& v) { v = in.get<double>(); });
  if (!in.done()) throw DataError("trailing bytes after checkpoint payload");
  return params;
}

std::string encode_json(const NetworkParams& params) {
  const NetworkConfig& c = params.config;
  nlohmann::ordered_json j;
  j["format"] = "csg-gconv";
  j["version"] = kVersion;
  j["config"] = {{"input_dim", c.input_dim}, {"hidden", c.hidden},     {"num_classes", c.num_classes},
                 {"kernels", c.kernels},     {"embed_dim", c.embed_dim}, {"leaky_slope", c.leaky_slope},
                 {"seed", c.seed}};
  j["layers"] = nlohmann::ordered_json::array();
  for (const auto& layer : params.layers) {
    std::vector<double> values;
    for_each_value(layer, [&](double v) { values.push_back(v); });
    j["layers"].push_back({{"values", values}});
  }
  return j.dump(1) + "\n";
}

NetworkParams decode_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "csg-gconv") throw DataError("not a checkpoint");
    if (j.at("version").get<std::uint32_t>() != kVersion) throw DataError("unsupported checkpoint version");
    NetworkParams params;
    const auto& jc = j.at("config");
    NetworkConfig& c = params.config;
    c.input_dim = jc.at("input_dim").get<int>();
    c.hidden = jc.at("hidden").get<std::vector<int>>();
    c.num_classes = jc.at("num_classes").get<int>();
    c.kernels = jc.at("kernels").get<int>();
    c.embed_dim = jc.at("embed_dim").get<int>();
    c.leaky_slope = jc.at("leaky_slope").get<double>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.validate();
    params.layers = empty_layers(c);
    const auto& jl = j.at("layers");
    if (jl.size() != params.layers.size()) throw DataError("checkpoint layer count mismatch");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      const auto values = jl[l].at("values").get<std::vector<double>>();
      std::size_t pos = 0;
      for_each_value(params.layers[l], [&](double& v) {
        if (pos >= values.size()) throw DataError("checkpoint layer too short");
        v = values[pos++];
      });
      if (pos != values.size()) throw DataError("checkpoint layer too long");
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed JSON checkpoint: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
}

}  // namespace

std::string encode_checkpoint(const NetworkParams& params, CheckpointFormat format) {
  return format == CheckpointFormat::binary ? encode_binary(params) : encode_json(params);
}

NetworkParams decode_checkpoint(const std::string& bytes) {
  if (!bytes.empty() && bytes[0] == '{') return decode_json(bytes);
  return decode_binary(bytes);
}

void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params, CheckpointFormat format) {
  write_text_file_atomic(path, encode_checkpoint(params, format));
}

NetworkParams load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw DataError("checkpoint not found: " + path.string());
  try {
    return decode_checkpoint(read_text_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

}  // namespace csg
