#ifndef WACRL_MODEL_HPP
#define WACRL_MODEL_HPP

#include "wacrl/common.hpp"

#include <filesystem>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace wacrl {

/// Partition of states and inputs by generator.
///
/// Generator g owns states [state_offsets[g], state_offsets[g+1]) and every
/// input j with input_of_gen[j] == g. A generator may own no input (the
/// reference machine of the synthetic benchmark).
struct BlockStructure {
  int gen_count = 0;
  std::vector<int> state_offsets;
  std::vector<int> input_of_gen;

  int state_dim() const { return state_offsets.empty() ? 0 : state_offsets.back(); }
  int input_dim() const { return static_cast<int>(input_of_gen.size()); }

  /// Owning generator of state `i`.
  int gen_of_state(int i) const;

  /// True when K(row, col) lies in an off-diagonal block K_ij, i != j.
  bool is_off_diagonal(int input_row, int state_col) const;

  /// Throws Error(Validation) if the invariants do not hold.
  void validate() const;

  bool operator==(const BlockStructure&) const = default;
};

struct SmallSignalModel {
  Matrix a;
  Matrix b;
  BlockStructure blocks;
  std::vector<std::string> labels;

  int n() const { return static_cast<int>(a.rows()); }
  int m() const { return static_cast<int>(b.cols()); }

  /// Checks dimensions against `blocks` and that B is block diagonal.
  void validate() const;
};

/// Physical parameters of one machine in the synthetic swing + actuator model.
///
/// synchronizing_coeffs[j] for j != i is the line stiffness to machine j;
/// the diagonal entry is the stiffness to an infinite bus (zero for a pure
/// relative-angle network).
struct GeneratorSpec {
  double inertia = 1.0;
  double damping = 0.0;
  std::vector<double> synchronizing_coeffs;
  double exciter_lag = 0.1;
};

/// Three states per machine (angle, speed, actuator output) and one input per
/// machine except `reference_gen`.
SmallSignalModel build_swing_model(const std::vector<GeneratorSpec>& specs,
                                   int reference_gen = 0);

/// Ten-machine benchmark with the block signature of the New England system
/// (10 generators, 9 inputs). Parameters are fixed, not random.
std::vector<GeneratorSpec> benchmark_specs();

SmallSignalModel benchmark_model();

/// Off-diagonal-block cardinality of a gain K (m x n).
int card_off(const Matrix& k, const BlockStructure& blocks);

/// Number of off-diagonal-block positions in an m x n gain.
int off_diagonal_capacity(const BlockStructure& blocks);

/// Directed communication links (i, j): generator i's controller needs
/// states of generator j.
std::set<std::pair<int, int>> comm_graph(const Matrix& k, const BlockStructure& blocks);

/// FNV-1a digest of the raw bytes of A and B, as 16 hex digits.
std::string model_hash(const SmallSignalModel& model);

// Model file: JSON document, see README for the schema.
std::string model_to_text(const SmallSignalModel& model);
SmallSignalModel model_from_text(const std::string& text);
void save_model(const SmallSignalModel& model, const std::filesystem::path& path);
SmallSignalModel load_model(const std::filesystem::path& path);

/// Writes `contents` to a temporary sibling and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

/// Shared matrix text helpers: row-major nested arrays at 17 significant digits.
std::string matrix_to_json_text(const Matrix& m, int indent);

}  // namespace wacrl

#endif  // WACRL_MODEL_HPP
