#include "fploc/model_io.hpp"

#include <cstring>
#include <fstream>

#include "fploc/exceptions.hpp"
#include "fploc/hash.hpp"
#include "fploc/version.hpp"

namespace fploc {

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Gcn: return "gcn";
    case ModelKind::BaselineDnn: return "dnn";
  }
  return "?";
}

ModelKind model_kind_from_name(const std::string& name) {
  if (name == "gcn") return ModelKind::Gcn;
  if (name == "dnn") return ModelKind::BaselineDnn;
  throw ConfigError("unknown model kind '" + name +
                    "' (expected 'gcn' or 'dnn')");
}

std::uint64_t adjacency_content_hash(const Matrix& adjacency) {
  return fnv1a64(adjacency.data(), adjacency.size() * sizeof(double));
}

namespace {

constexpr char kModelMagic[4] = {'F', 'P', 'M', 'A'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const char* what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ParseError(std::string("model file: truncated reading ") + what);
  return v;
}

void write_matrix(std::ostream& out, const Matrix& m) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.rows()));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Matrix read_matrix(std::istream& in, const char* what) {
  const auto rows = read_pod<std::uint32_t>(in, what);
  const auto cols = read_pod<std::uint32_t>(in, what);
  Matrix m(rows, cols);
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!in) throw ParseError(std::string("model file: truncated reading ") + what);
  return m;
}

void write_stack(std::ostream& out, const FcStack& stack) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(stack.weights.size()));
  for (std::size_t l = 0; l < stack.weights.size(); ++l) {
    write_matrix(out, stack.weights[l]);
    write_matrix(out, stack.biases[l]);
  }
}

FcStack read_stack(std::istream& in) {
  const auto layers = read_pod<std::uint32_t>(in, "fc layer count");
  FcStack stack;
  for (std::uint32_t l = 0; l < layers; ++l) {
    stack.weights.push_back(read_matrix(in, "fc weights"));
    stack.biases.push_back(read_matrix(in, "fc bias"));
  }
  return stack;
}

}  // namespace

void save_model(const std::string& path, const TrainedModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write file: " + path);
  out.write(kModelMagic, 4);
  write_pod<std::uint32_t>(out, kModelVersion);
  const std::string tool(kToolVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tool.size()));
  out.write(tool.data(), static_cast<std::streamsize>(tool.size()));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(model.kind));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.n_ap));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.n_s));
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.n_classes));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(model.normalization));
  write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(model.mlp_input));
  write_pod<std::uint8_t>(out,
                          static_cast<std::uint8_t>(model.adjacency_method));
  write_pod<std::uint64_t>(out, model.adjacency_hash);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(model.rp_table.size()));
  for (const auto& rp : model.rp_table) {
    write_pod(out, rp.longitude);
    write_pod(out, rp.latitude);
    write_pod<std::int32_t>(out, rp.floor);
    write_pod<std::int32_t>(out, rp.building);
  }
  if (model.kind == ModelKind::Gcn) {
    write_matrix(out, model.graph.adjacency);
    write_matrix(out, model.gcn.theta0);
    write_matrix(out, model.gcn.theta1);
    write_stack(out, model.gcn.mlp);
  } else {
    write_stack(out, model.dnn.fc);
  }
  if (!out) throw IoError("write failed: " + path);
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kModelMagic, 4) != 0) {
    throw ParseError("model file: bad magic (not an FPMA file): " + path);
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kModelVersion) {
    throw ParseError("model file: unsupported version " +
                     std::to_string(version));
  }
  const auto tool_len = read_pod<std::uint32_t>(in, "tool version");
  std::string tool(tool_len, '\0');
  in.read(tool.data(), tool_len);
  if (!in) throw ParseError("model file: truncated tool version");

  TrainedModel model;
  model.kind = static_cast<ModelKind>(read_pod<std::uint8_t>(in, "kind"));
  model.n_ap = read_pod<std::uint32_t>(in, "n_ap");
  model.n_s = read_pod<std::uint32_t>(in, "n_s");
  model.n_classes = read_pod<std::uint32_t>(in, "n_classes");
  model.normalization =
      static_cast<NormScheme>(read_pod<std::uint8_t>(in, "normalization"));
  model.mlp_input =
      static_cast<MlpInput>(read_pod<std::uint8_t>(in, "mlp_input"));
  model.adjacency_method = static_cast<AdjacencyMethod>(
      read_pod<std::uint8_t>(in, "adjacency method"));
  model.adjacency_hash = read_pod<std::uint64_t>(in, "adjacency hash");
  const auto n_rp = read_pod<std::uint32_t>(in, "rp count");
  model.rp_table.reserve(n_rp);
  for (std::uint32_t i = 0; i < n_rp; ++i) {
    RpEntry rp;
    rp.longitude = read_pod<double>(in, "rp");
    rp.latitude = read_pod<double>(in, "rp");
    rp.floor = read_pod<std::int32_t>(in, "rp");
    rp.building = read_pod<std::int32_t>(in, "rp");
    model.rp_table.push_back(rp);
  }
  if (model.kind == ModelKind::Gcn) {
    Matrix adjacency = read_matrix(in, "adjacency");
    if (adjacency_content_hash(adjacency) != model.adjacency_hash) {
      throw ParseError("model file: adjacency hash mismatch (corrupt file?)");
    }
    model.graph = build_propagation(std::move(adjacency),
                                    model.adjacency_method);
    model.gcn.theta0 = read_matrix(in, "theta0");
    model.gcn.theta1 = read_matrix(in, "theta1");
    model.gcn.mlp = read_stack(in);
  } else {
    model.dnn.fc = read_stack(in);
  }
  return model;
}

Matrix predict_probs(const TrainedModel& model,
                     std::span<const Matrix> raw_rssi) {
  if (raw_rssi.empty()) {
    throw ValidationError("predict_probs: empty batch");
  }
  std::vector<Matrix> normalized(raw_rssi.begin(), raw_rssi.end());
  for (auto& m : normalized) {
    if (m.rows() != model.n_ap || m.cols() != model.n_s) {
      throw ShapeError("predict_probs: sample is " + m.shape_str() +
                       ", model expects " + std::to_string(model.n_ap) + "x" +
                       std::to_string(model.n_s));
    }
    for (double& v : m.values()) v = normalize_value(v, model.normalization);
  }
  if (model.kind == ModelKind::Gcn) {
    return forward(std::span<const Matrix>(normalized), model.graph,
                   model.gcn, model.mlp_input)
        .probs();
  }
  return dnn_forward(normalized, model.dnn).act.back();
}

}  // namespace fploc
