#include "wacrl/model.hpp"

#include "json_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wacrl {

using json = nlohmann::json;

int BlockStructure::gen_of_state(int i) const {
  const auto it = std::upper_bound(state_offsets.begin(), state_offsets.end(), i);
  return static_cast<int>(it - state_offsets.begin()) - 1;
}

bool BlockStructure::is_off_diagonal(int input_row, int state_col) const {
  return input_of_gen[input_row] != gen_of_state(state_col);
}

void BlockStructure::validate() const {
  if (gen_count <= 0) throw Error(ErrorCode::Validation, "gen_count must be positive");
  if (static_cast<int>(state_offsets.size()) != gen_count + 1)
    throw Error(ErrorCode::Validation, "state_offsets must have gen_count+1 entries");
  if (state_offsets.front() != 0) throw Error(ErrorCode::Validation, "state_offsets[0] must be 0");
  for (int g = 0; g < gen_count; ++g) {
    if (state_offsets[g + 1] <= state_offsets[g])
      throw Error(ErrorCode::Validation, "state_offsets must be strictly increasing");
  }
  for (int owner : input_of_gen) {
    if (owner < 0 || owner >= gen_count)
      throw Error(ErrorCode::Validation, "input_of_gen entry out of range");
  }
}

void SmallSignalModel::validate() const {
  blocks.validate();
  const int n_states = blocks.state_dim();
  if (a.rows() != n_states || a.cols() != n_states)
    throw Error(ErrorCode::DimensionMismatch, "A must be n x n with n = state_offsets[n_g]");
  if (b.rows() != n_states || b.cols() != blocks.input_dim())
    throw Error(ErrorCode::DimensionMismatch, "B must be n x m with m = |input_of_gen|");
  if (!labels.empty() && static_cast<int>(labels.size()) != n_states)
    throw Error(ErrorCode::DimensionMismatch, "labels must have n entries");
  if (!a.allFinite() || !b.allFinite())
    throw Error(ErrorCode::Validation, "A and B must be finite");
  for (int j = 0; j < b.cols(); ++j) {
    const int owner = blocks.input_of_gen[j];
    for (int i = 0; i < b.rows(); ++i) {
      if (b(i, j) != 0.0 && blocks.gen_of_state(i) != owner) {
        throw Error(ErrorCode::Validation,
                    "B is not block diagonal: input " + std::to_string(j) + " drives state " +
                        std::to_string(i) + " outside generator " + std::to_string(owner));
      }
    }
  }
}

SmallSignalModel build_swing_model(const std::vector<GeneratorSpec>& specs, int reference_gen) {
  const int ng = static_cast<int>(specs.size());
  if (ng < 2) throw Error(ErrorCode::InvalidParameter, "at least two generators are required");
  if (reference_gen < -1 || reference_gen >= ng)
    throw Error(ErrorCode::InvalidParameter, "reference generator index out of range");

  for (int i = 0; i < ng; ++i) {
    const auto& s = specs[i];
    if (!(s.inertia > 0.0)) throw Error(ErrorCode::InvalidParameter, "inertia must be positive");
    if (!(s.exciter_lag > 0.0))
      throw Error(ErrorCode::InvalidParameter, "exciter_lag must be positive");
    if (!(s.damping >= 0.0)) throw Error(ErrorCode::InvalidParameter, "damping must be non-negative");
    if (static_cast<int>(s.synchronizing_coeffs.size()) != ng)
      throw Error(ErrorCode::InvalidParameter, "synchronizing_coeffs must have one entry per generator");
    for (int j = 0; j < ng; ++j) {
      const double kij = s.synchronizing_coeffs[j];
      if (!(kij >= 0.0))
        throw Error(ErrorCode::InvalidParameter, "synchronizing coefficients must be non-negative");
      const double kji = specs[j].synchronizing_coeffs.size() == static_cast<std::size_t>(ng)
                             ? specs[j].synchronizing_coeffs[i]
                             : kij;
      if (std::abs(kij - kji) > 1e-12 * std::max(1.0, std::abs(kij)))
        throw Error(ErrorCode::InvalidParameter, "coupling matrix must be symmetric");
    }
  }

  constexpr int kStates = 3;
  const int n = kStates * ng;
  SmallSignalModel model;
  model.a = Matrix::Zero(n, n);
  model.blocks.gen_count = ng;
  for (int g = 0; g <= ng; ++g) model.blocks.state_offsets.push_back(kStates * g);
  for (int g = 0; g < ng; ++g) {
    if (g != reference_gen) model.blocks.input_of_gen.push_back(g);
  }
  model.b = Matrix::Zero(n, model.blocks.input_dim());

  for (int i = 0; i < ng; ++i) {
    const auto& s = specs[i];
    const int d = kStates * i;  // angle
    const int w = d + 1;        // speed
    const int e = d + 2;        // actuator
    model.a(d, w) = 1.0;

    double stiffness = s.synchronizing_coeffs[i];
    for (int j = 0; j < ng; ++j) {
      if (j == i) continue;
      const double kij = s.synchronizing_coeffs[j];
      stiffness += kij;
      if (kij != 0.0) model.a(w, kStates * j) = kij / s.inertia;
    }
    model.a(w, d) = -stiffness / s.inertia;
    model.a(w, w) = -s.damping / s.inertia;
    model.a(w, e) = 1.0 / s.inertia;
    model.a(e, e) = -1.0 / s.exciter_lag;

    const std::string idx = std::to_string(i + 1);
    model.labels.push_back("delta_" + idx);
    model.labels.push_back("omega_" + idx);
    model.labels.push_back("act_" + idx);
  }
  for (int j = 0; j < model.blocks.input_dim(); ++j) {
    const int g = model.blocks.input_of_gen[j];
    model.b(kStates * g + 2, j) = 1.0 / specs[g].exciter_lag;
  }
  model.validate();
  return model;
}

std::vector<GeneratorSpec> benchmark_specs() {
  constexpr int ng = 10;
  // Three coherent areas {0,1,2,9}, {3,4,5,6}, {7,8} joined by weak ties, each
  // machine tied to an infinite bus.
  struct Edge { int i, j; double k; };
  constexpr std::array<Edge, 13> edges{{
      {0, 1, 12.0}, {1, 2, 15.0}, {0, 9, 10.0}, {2, 9, 9.0},
      {3, 4, 16.0}, {4, 5, 14.0}, {5, 6, 15.0}, {3, 6, 11.0},
      {7, 8, 13.0},
      {2, 3, 2.5}, {6, 7, 2.0}, {8, 9, 1.8}, {1, 5, 1.2},
  }};
  constexpr std::array<double, ng> inertia{14.0, 6.1, 7.2, 5.7, 5.2, 7.0, 5.3, 4.9, 6.9, 8.4};
  constexpr std::array<double, ng> damping{0.5, 0.9, 1.1, 0.8, 0.8, 1.0, 0.8, 0.7, 1.0, 1.2};
  constexpr std::array<double, ng> lag{0.30, 0.25, 0.40, 0.35, 0.20, 0.30, 0.45, 0.25, 0.35, 0.40};

  std::vector<GeneratorSpec> specs(ng);
  for (int i = 0; i < ng; ++i) {
    specs[i].inertia = inertia[i];
    specs[i].damping = damping[i];
    specs[i].exciter_lag = lag[i];
    specs[i].synchronizing_coeffs.assign(ng, 0.0);
    specs[i].synchronizing_coeffs[i] = 5.0;
  }
  for (const auto& e : edges) {
    specs[e.i].synchronizing_coeffs[e.j] = e.k;
    specs[e.j].synchronizing_coeffs[e.i] = e.k;
  }
  return specs;
}

SmallSignalModel benchmark_model() { return build_swing_model(benchmark_specs(), 0); }

int card_off(const Matrix& k, const BlockStructure& blocks) {
  if (k.rows() != blocks.input_dim() || k.cols() != blocks.state_dim())
    throw Error(ErrorCode::DimensionMismatch, "gain dimensions do not match block structure");
  int count = 0;
  for (int r = 0; r < k.rows(); ++r) {
    for (int c = 0; c < k.cols(); ++c) {
      if (k(r, c) != 0.0 && blocks.is_off_diagonal(r, c)) ++count;
    }
  }
  return count;
}

int off_diagonal_capacity(const BlockStructure& blocks) {
  int count = 0;
  for (int r = 0; r < blocks.input_dim(); ++r) {
    const int g = blocks.input_of_gen[r];
    count += blocks.state_dim() - (blocks.state_offsets[g + 1] - blocks.state_offsets[g]);
  }
  return count;
}

std::set<std::pair<int, int>> comm_graph(const Matrix& k, const BlockStructure& blocks) {
  if (k.rows() != blocks.input_dim() || k.cols() != blocks.state_dim())
    throw Error(ErrorCode::DimensionMismatch, "gain dimensions do not match block structure");
  std::set<std::pair<int, int>> links;
  for (int r = 0; r < k.rows(); ++r) {
    const int gi = blocks.input_of_gen[r];
    for (int c = 0; c < k.cols(); ++c) {
      const int gj = blocks.gen_of_state(c);
      if (gi != gj && k(r, c) != 0.0) links.emplace(gi, gj);
    }
  }
  return links;
}

std::string model_hash(const SmallSignalModel& model) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto mix = [&h](const Matrix& m) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(m.data());
    const std::size_t len = static_cast<std::size_t>(m.size()) * sizeof(double);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= bytes[i];
      h *= 0x100000001B3ULL;
    }
  };
  mix(model.a);
  mix(model.b);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string matrix_to_json_text(const Matrix& m, int indent) {
  const std::string pad(indent, ' ');
  std::ostringstream os;
  os << "[";
  char buf[40];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    os << (i == 0 ? "\n" : ",\n") << pad << "  [";
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      os << (j == 0 ? "" : ", ") << buf;
    }
    os << "]";
  }
  os << (m.rows() > 0 ? "\n" + pad + "]" : "]");
  return os.str();
}

using detail::matrix_from_json;
using detail::required;

std::string model_to_text(const SmallSignalModel& model) {
  model.validate();
  const auto& bl = model.blocks;
  std::ostringstream os;
  os << "{\n";
  os << "  \"format\": \"wacrl-model\",\n";
  os << "  \"version\": 1,\n";
  os << "  \"n\": " << model.n() << ",\n";
  os << "  \"m\": " << model.m() << ",\n";
  os << "  \"n_g\": " << bl.gen_count << ",\n";
  os << "  \"state_offsets\": " << json(bl.state_offsets).dump() << ",\n";
  os << "  \"input_of_gen\": " << json(bl.input_of_gen).dump() << ",\n";
  if (!model.labels.empty()) os << "  \"labels\": " << json(model.labels).dump() << ",\n";
  os << "  \"A\": " << matrix_to_json_text(model.a, 2) << ",\n";
  os << "  \"B\": " << matrix_to_json_text(model.b, 2) << "\n";
  os << "}\n";
  return os.str();
}

SmallSignalModel model_from_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("malformed model file: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::Parse, "model file must be a JSON object");
  if (doc.contains("format") && doc["format"] != "wacrl-model")
    throw Error(ErrorCode::Parse, "unexpected format tag");

  SmallSignalModel model;
  const int n = required<int>(doc, "n");
  const int m = required<int>(doc, "m");
  model.blocks.gen_count = required<int>(doc, "n_g");
  model.blocks.state_offsets = required<std::vector<int>>(doc, "state_offsets");
  model.blocks.input_of_gen = required<std::vector<int>>(doc, "input_of_gen");
  if (doc.contains("labels")) model.labels = required<std::vector<std::string>>(doc, "labels");
  if (n <= 0 || m < 0) throw Error(ErrorCode::Parse, "n must be positive and m non-negative");
  if (model.blocks.input_dim() != m)
    throw Error(ErrorCode::DimensionMismatch, "input_of_gen length differs from m");
  model.blocks.validate();
  if (model.blocks.state_dim() != n)
    throw Error(ErrorCode::DimensionMismatch, "state_offsets[n_g] differs from n");
  if (!doc.contains("A") || !doc.contains("B")) throw Error(ErrorCode::Parse, "missing A or B");
  model.a = matrix_from_json(doc["A"], n, n, "A");
  model.b = matrix_from_json(doc["B"], n, m, "B");
  model.validate();
  return model;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + tmp.string());
    out << contents;
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot rename onto " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_model(const SmallSignalModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, model_to_text(model));
}

SmallSignalModel load_model(const std::filesystem::path& path) {
  return model_from_text(read_file(path));
}

}  // namespace wacrl
