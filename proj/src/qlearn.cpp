#include "wacrl/qlearn.hpp"

#include "json.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

namespace wacrl {

Vector vech(const Matrix& g) {
  if (g.rows() != g.cols()) throw Error(ErrorCode::DimensionMismatch, "vech needs a square matrix");
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw Error(ErrorCode::InvalidParameter, "vech needs a symmetric matrix");
  const auto d = static_cast<int>(g.rows());
  Vector w(vech_dim(d));
  int k = 0;
  for (int i = 0; i < d; ++i) {
    w(k++) = g(i, i);
    for (int j = i + 1; j < d; ++j) w(k++) = g(i, j) + g(j, i);
  }
  return w;
}

Matrix unvech(const Vector& w) {
  const auto p = static_cast<double>(w.size());
  const int d = static_cast<int>(std::lround((std::sqrt(8.0 * p + 1.0) - 1.0) / 2.0));
  if (vech_dim(d) != w.size())
    throw Error(ErrorCode::DimensionMismatch, "vector length is not a triangular number");
  Matrix g(d, d);
  int k = 0;
  for (int i = 0; i < d; ++i) {
    g(i, i) = w(k++);
    for (int j = i + 1; j < d; ++j) {
      g(i, j) = 0.5 * w(k++);
      g(j, i) = g(i, j);
    }
  }
  return g;
}

Vector basis(const Vector& u) {
  const auto d = static_cast<int>(u.size());
  Vector phi(vech_dim(d));
  int k = 0;
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) phi(k++) = u(i) * u(j);
  }
  return phi;
}

int ExplorationNoise::distinct_frequency_count() const {
  std::vector<double> all;
  for (const auto& f : frequencies) all.insert(all.end(), f.begin(), f.end());
  std::sort(all.begin(), all.end());
  return static_cast<int>(std::unique(all.begin(), all.end()) - all.begin());
}

ExplorationNoise ExplorationNoise::multisine(int channels, double rms, std::uint64_t seed,
                                             double duration, int per_channel, double lo,
                                             double hi) {
  if (channels < 0 || per_channel < 1 || !(lo > 0.0) || !(hi >= lo) || !(duration >= 0.0))
    throw Error(ErrorCode::InvalidParameter, "invalid multisine parameters");
  ExplorationNoise noise;
  noise.duration = duration;
  noise.frequencies.assign(channels, {});
  noise.phases.assign(channels, {});
  const int total = per_channel * std::max(channels, 1);
  Rng rng(seed);
  for (int k = 0; k < per_channel * channels; ++k) {
    const double frac = total > 1 ? static_cast<double>(k) / (total - 1) : 0.0;
    const double w = lo * std::pow(hi / lo, frac);
    noise.frequencies[k % channels].push_back(w);
  }
  for (int c = 0; c < channels; ++c) {
    for (int k = 0; k < per_channel; ++k)
      noise.phases[c].push_back(2.0 * std::numbers::pi * rng.uniform());
  }
  noise.amplitudes = Vector::Constant(channels, rms / std::sqrt(0.5 * per_channel));
  return noise;
}

Vector exploration_input(const ExplorationNoise& noise, double t) {
  const auto channels = static_cast<Eigen::Index>(noise.frequencies.size());
  Vector u = Vector::Zero(channels);
  if (t > noise.duration) return u;
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto& freqs = noise.frequencies[c];
    const auto& phases = noise.phases[c];
    double sum = 0.0;
    for (std::size_t k = 0; k < freqs.size(); ++k) sum += std::sin(freqs[k] * t + phases[k]);
    u(c) = noise.amplitudes(c) * sum;
  }
  return u;
}

std::string LearnerConfig::validate() const {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::InvalidParameter, msg); };
  if (!(sample_period > 0.0)) bad("sample_period must be positive");
  if (substeps < 1) bad("substeps must be >= 1");
  if (!(alpha_c > 0.0)) bad("alpha_c must be positive");
  if (!(alpha_a > 0.0)) bad("alpha_a must be positive");
  if (!(eps_w > 0.0) || !(eps_k > 0.0)) bad("convergence thresholds must be positive");
  if (!(newton_step > 0.0 && newton_step <= 1.0)) bad("newton_step must lie in (0, 1]");
  if (max_iters < 1) bad("max_iters must be >= 1");
  if (cg_iters < 1) bad("cg_iters must be >= 1");
  if (!(cg_damping >= 0.0)) bad("cg_damping must be non-negative");
  if (actor_period < 1) bad("actor_period must be >= 1");
  if (critic_patience < 1) bad("critic_patience must be >= 1");
  if (!(pe_duration >= 0.0)) bad("pe_duration must be non-negative");
  if (pe_frequencies < 1) bad("pe_frequencies must be >= 1");
  if (!(pe_amplitude_fraction >= 0.0)) bad("pe_amplitude_fraction must be non-negative");
  if (!(divergence_factor > 1.0)) bad("divergence_factor must exceed 1");
  if (alpha_c < 10.0 * alpha_a)
    return "alpha_c should be much larger than alpha_a (alpha_c >= 10 alpha_a)";
  return {};
}

double critic_error(const Vector& w, const CriticWindow& window, double period) {
  if (std::abs(window.duration - period) > 1e-12)
    throw Error(ErrorCode::InvalidParameter, "critic window length differs from the sample period");
  if (window.u_start.size() != window.u_end.size() || vech_dim(static_cast<int>(window.u_end.size())) != w.size())
    throw Error(ErrorCode::DimensionMismatch, "critic window does not match the weight vector");
  return w.dot(basis(window.u_end) - basis(window.u_start)) + window.cost;
}

Vector critic_update(const Vector& w, double e_c, const Vector& sigma, double alpha_c, double dt) {
  const double norm = 1.0 + sigma.squaredNorm();
  return w - (dt * alpha_c * e_c / (norm * norm)) * sigma;
}

Vector actor_error(const Matrix& k, const Kernel& kernel, const Vector& x, double max_condition) {
  return k * x - kernel.greedy_gain(max_condition) * x;
}

Matrix actor_gradient(const Matrix& k, const Kernel& kernel, const Vector& x, double max_condition) {
  return 2.0 * actor_error(k, kernel, x, max_condition) * x.transpose();
}

Mask self_block_mask(const BlockStructure& blocks) {
  Mask mask = Mask::Constant(blocks.input_dim(), blocks.state_dim(), false);
  for (int r = 0; r < blocks.input_dim(); ++r) {
    const int g = blocks.input_of_gen[r];
    for (int c = blocks.state_offsets[g]; c < blocks.state_offsets[g + 1]; ++c) mask(r, c) = true;
  }
  return mask;
}

Mask largest_entries(const Matrix& values, const BlockStructure& blocks, int count,
                     bool include_self) {
  const auto rows = values.rows();
  const auto cols = values.cols();
  Mask mask = Mask::Constant(rows, cols, false);
  if (count <= 0) return mask;
  struct Entry { double mag; Eigen::Index idx; };
  std::vector<Entry> ranked;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (include_self || blocks.is_off_diagonal(static_cast<int>(r), static_cast<int>(c)))
        ranked.push_back({std::abs(values(r, c)), r * cols + c});
    }
  }
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(count), ranked.size());
  std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(keep), ranked.end(),
                    [](const Entry& a, const Entry& b) {
                      if (a.mag != b.mag) return a.mag > b.mag;
                      return a.idx < b.idx;
                    });
  for (std::size_t i = 0; i < keep; ++i) mask(ranked[i].idx / cols, ranked[i].idx % cols) = true;
  return mask;
}

Matrix prune_to_budget(const Matrix& k, const BlockStructure& blocks, int s, bool count_self_links,
                       Mask* kept) {
  Mask keep = largest_entries(k, blocks, s, count_self_links);
  if (!count_self_links) keep = keep || self_block_mask(blocks);
  Matrix out = keep.select(k, Matrix::Zero(k.rows(), k.cols()));
  if (kept) *kept = keep;
  return out;
}

namespace {

Matrix batch_covariance(std::span<const Vector> batch, Eigen::Index n) {
  Matrix h = Matrix::Zero(n, n);
  for (const auto& x : batch) h.noalias() += x * x.transpose();
  return h;
}

// Conjugate gradient for an SPD system; returns false on breakdown.
bool conjugate_gradient(const Matrix& a, const Vector& b, int max_iters, Vector& x, int& iters) {
  x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  const double stop = 1e-24 * std::max(rr, 1e-300);
  iters = 0;
  while (iters < max_iters && rr > stop) {
    const Vector ap = a * p;
    const double pap = p.dot(ap);
    if (!(pap > 0.0) || !std::isfinite(pap)) return false;
    const double alpha = rr / pap;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
    ++iters;
  }
  return x.allFinite();
}

}  // namespace

Actor grasp_step(const Actor& actor, const Kernel& kernel, std::span<const Vector> batch,
                 const BlockStructure& blocks, const LearnerConfig& config,
                 GraspDiagnostics* diagnostics) {
  if (batch.empty()) throw Error(ErrorCode::InvalidParameter, "GraSP step needs a nonempty batch");
  const Eigen::Index m = actor.k.rows();
  const Eigen::Index n = actor.k.cols();
  const Matrix target = kernel.greedy_gain(config.max_g22_condition);
  const Matrix h = batch_covariance(batch, n);
  const Matrix grad = 2.0 * (actor.k - target) * h;
  const int s = actor.budget_s;

  Mask tau;
  if (actor.support_frozen) {
    tau = actor.support;
  } else {
    const int wide = s > std::numeric_limits<int>::max() / 2 ? std::numeric_limits<int>::max() : 2 * s;
    tau = largest_entries(grad, blocks, wide, config.count_self_links) || actor.support;
    if (!config.count_self_links) tau = tau || self_block_mask(blocks);
  }

  // Restricted Newton direction; the Gauss-Newton Hessian is block diagonal
  // over rows of K, each block 2 H restricted to the row's coordinates.
  Matrix step = Matrix::Zero(m, n);
  int cg_total = 0;
  bool fallback = false;
  for (Eigen::Index r = 0; r < m; ++r) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index c = 0; c < n; ++c) {
      if (tau(r, c)) idx.push_back(c);
    }
    if (idx.empty()) continue;
    const auto dim = static_cast<Eigen::Index>(idx.size());
    Matrix sub(dim, dim);
    Vector rhs(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      rhs(i) = grad(r, idx[i]);
      for (Eigen::Index j = 0; j < dim; ++j) sub(i, j) = 2.0 * h(idx[i], idx[j]);
      sub(i, i) += config.cg_damping;
    }
    Vector delta;
    int iters = 0;
    if (conjugate_gradient(sub, rhs, config.cg_iters, delta, iters)) {
      for (Eigen::Index i = 0; i < dim; ++i) step(r, idx[i]) = config.newton_step * delta(i);
    } else {
      fallback = true;
      for (Eigen::Index i = 0; i < dim; ++i) step(r, idx[i]) = actor.alpha_a * rhs(i);
    }
    cg_total += iters;
  }

  Actor next = actor;
  const Matrix intermediate = tau.select(actor.k - step, Matrix::Zero(m, n));
  if (actor.support_frozen) {
    next.k = intermediate;
  } else {
    Mask kept;
    next.k = prune_to_budget(intermediate, blocks, s, config.count_self_links, &kept);
    next.support = kept && tau;
  }

  if (diagnostics) {
    diagnostics->gradient = grad;
    diagnostics->cg_iterations = cg_total;
    diagnostics->cg_fallback = fallback;
    int off = 0;
    for (Eigen::Index r = 0; r < m; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        if (tau(r, c) && blocks.is_off_diagonal(static_cast<int>(r), static_cast<int>(c))) ++off;
      }
    }
    diagnostics->tau_off_diagonal = off;
  }
  return next;
}

double restricted_stationarity(const Actor& actor, const Kernel& kernel,
                               std::span<const Vector> batch, double max_condition) {
  const Eigen::Index m = actor.k.rows();
  const Eigen::Index n = actor.k.cols();
  const Matrix target = kernel.greedy_gain(max_condition);
  const Matrix grad = 2.0 * (actor.k - target) * batch_covariance(batch, n);
  double worst = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (actor.k(r, c) != 0.0) worst = std::max(worst, std::abs(grad(r, c)));
    }
  }
  return worst;
}

namespace {

Vector stack(const Vector& x, const Vector& u) {
  Vector out(x.size() + u.size());
  out << x, u;
  return out;
}

Kernel random_kernel(int n, int m, Rng& rng) {
  const int d = n + m;
  Matrix factor(d, 2 * d);
  for (Eigen::Index i = 0; i < factor.size(); ++i) factor.data()[i] = rng.normal();
  Kernel k;
  k.n = n;
  k.m = m;
  k.g = factor * factor.transpose() / (2.0 * d);
  k.g = 0.5 * (k.g + k.g.transpose()).eval();
  return k;
}

}  // namespace

LearnResult learn(Plant& plant, const SmallSignalModel& nominal, const CostWeights& w,
                  const LearnerConfig& config) {
  const auto wall_start = std::chrono::steady_clock::now();
  const std::string warning = config.validate();
  nominal.validate();
  const auto& blocks = nominal.blocks;
  const int n = nominal.n();
  const int m = nominal.m();
  w.validate(n, m);
  const double period = plant.sample_period();
  if (std::abs(period - config.sample_period) > 1e-12)
    throw Error(ErrorCode::InvalidParameter, "plant sample period differs from the learner's");

  const int s = config.budget_s < 0 ? m * n : config.budget_s;

  Kernel kernel0;
  Matrix k0;
  if (config.init == InitMode::Nominal) {
    kernel0 = nominal_kernel(nominal, w, config.include_value_term);
    k0 = w.r.llt().solve(Matrix(kernel0.g21()));
  } else {
    Rng rng(derive_seed(config.seed, 0x5EED));
    kernel0 = random_kernel(n, m, rng);
    k0 = Matrix(m, n);
    for (Eigen::Index i = 0; i < k0.size(); ++i) k0.data()[i] = 0.1 * rng.normal();
  }

  LearnResult result;
  if (!warning.empty()) result.diagnostic = "warning: " + warning;
  CriticState& critic = result.critic;
  critic.w = vech(kernel0.g);
  critic.alpha_c = config.alpha_c;
  critic.eps_w = config.eps_w;

  Actor& actor = result.actor;
  Mask kept;
  actor.k = prune_to_budget(k0, blocks, s, config.count_self_links, &kept);
  actor.support = kept;
  actor.budget_s = s;
  actor.alpha_a = config.alpha_a;
  actor.eps_k = config.eps_k;
  result.max_card_off = card_off(actor.k, blocks);

  Vector x = plant.current_state();
  double t = plant.time();
  const Vector u_init = -actor.k * x;
  const double probe_rms = config.pe_amplitude_fraction * (m > 0 ? u_init.cwiseAbs().maxCoeff() : 0.0);
  const ExplorationNoise noise =
      ExplorationNoise::multisine(m, probe_rms, derive_seed(config.seed, 0xE7), config.pe_duration,
                                  config.pe_frequencies, config.pe_freq_lo, config.pe_freq_hi);
  if (config.pe_duration > 0.0 && probe_rms > 0.0 &&
      2 * noise.distinct_frequency_count() < vech_dim(n + m)) {
    throw Error(ErrorCode::InvalidParameter,
                "exploration probe has fewer than p/2 distinct frequencies");
  }

  const ControlLaw law = [&actor, &noise](double tau, const Vector& xs) -> Vector {
    return -actor.k * xs + exploration_input(noise, tau);
  };
  Vector u = law(t, x);
  const double limit = config.divergence_factor * std::max(x.norm(), 1e-300);

  Trajectory& traj = result.trajectory;
  traj.times.push_back(t);
  traj.states.push_back(x);
  traj.inputs.push_back(u);

  bool critic_active = true;
  int quiet_windows = 0;
  double last_dw = 0.0;
  std::vector<Vector> batch;
  batch.reserve(static_cast<std::size_t>(config.actor_period));
  Kernel kernel = kernel0;

  for (int iter = 0; iter < config.max_iters; ++iter) {
    batch.clear();
    double ec_sq = 0.0;
    for (int j = 0; j < config.actor_period; ++j) {
      const Vector u_start = stack(x, u);
      WindowResult r;
      try {
        r = plant.apply(law);
      } catch (const DivergenceError& e) {
        result.diverged = true;
        result.diagnostic = std::string("state diverged: ") + e.what();
        break;
      }
      t = plant.time();
      x = r.x_next;
      u = law(t, x);
      traj.times.push_back(t);
      traj.states.push_back(x);
      traj.inputs.push_back(u);
      traj.window_costs.push_back(r.window_cost);
      if (!x.allFinite() || x.norm() > limit) {
        result.diverged = true;
        result.diagnostic = "state norm exceeded the divergence limit at t = " + std::to_string(t);
        break;
      }

      const CriticWindow window{u_start, stack(x, u), r.window_cost, period};
      const double e_c = critic_error(critic.w, window, period);
      ec_sq += e_c * e_c;
      if (critic_active) {
        const Vector sigma = basis(window.u_end) - basis(window.u_start);
        const Vector next = critic_update(critic.w, e_c, sigma, critic.alpha_c, period);
        last_dw = (next - critic.w).norm();
        critic.w = next;
        quiet_windows = last_dw < critic.eps_w ? quiet_windows + 1 : 0;
        if (quiet_windows >= config.critic_patience) {
          critic_active = false;
          critic.converged = true;
          actor.support_frozen = true;
          result.phase2_time = t;
        }
      }
      batch.push_back(x);
    }
    if (result.diverged) {
      traj.diverged = true;
      break;
    }

    kernel.n = n;
    kernel.m = m;
    kernel.g = unvech(critic.w);
    Actor next;
    GraspDiagnostics diag;
    double ea_sq = 0.0;
    try {
      for (const auto& xs : batch)
        ea_sq += actor_error(actor.k, kernel, xs, config.max_g22_condition).squaredNorm();
      next = grasp_step(actor, kernel, batch, blocks, config, &diag);
    } catch (const Error& e) {
      result.diagnostic = std::string("learning halted: ") + e.what();
      break;
    }

    const double dk = (next.k - actor.k).norm();
    const int changes = static_cast<int>((next.support != actor.support).count());
    actor = std::move(next);
    const int card = card_off(actor.k, blocks);
    result.max_card_off = std::max(result.max_card_off, card);

    LearnLogEntry entry;
    entry.iteration = iter;
    entry.time = t;
    entry.critic_error = std::sqrt(ec_sq / static_cast<double>(batch.size()));
    entry.actor_error = std::sqrt(ea_sq / static_cast<double>(batch.size()));
    entry.card_off = card;
    entry.dk = dk;
    entry.dw = last_dw;
    entry.phase = actor.support_frozen ? 2 : 1;
    entry.support_changes = changes;
    entry.cg_fallback = diag.cg_fallback;
    entry.wall_clock =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    result.log.push_back(entry);
    result.iterations = iter + 1;

    if (actor.support_frozen && dk < actor.eps_k) {
      result.converged = true;
      break;
    }
  }

  result.stop_time = t;
  if (!batch.empty() && !result.diverged) {
    try {
      result.stationarity = restricted_stationarity(actor, kernel, batch, config.max_g22_condition);
    } catch (const Error&) {
      result.stationarity = std::numeric_limits<double>::infinity();
    }
  }
  if (!result.converged && !result.diverged && result.diagnostic.empty()) {
    result.diagnostic = "warning: no convergence within max_iters; returning the last iterate";
  }
  return result;
}

std::string learn_log_to_csv(const std::vector<LearnLogEntry>& log) {
  std::ostringstream os;
  os << "iteration,time,e_c,e_a,card_off,dk,dw,phase,support_changes,cg_fallback\n";
  char buf[256];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%d,%.17g,%.17g,%d,%d,%d\n", e.iteration,
                  e.time, e.critic_error, e.actor_error, e.card_off, e.dk, e.dw, e.phase,
                  e.support_changes, e.cg_fallback ? 1 : 0);
    os << buf;
  }
  return os.str();
}

std::string actor_to_text(const Actor& actor, const BlockStructure& blocks) {
  std::ostringstream os;
  os << "{\n";
  os << "  \"format\": \"wacrl-actor\",\n";
  os << "  \"m\": " << actor.k.rows() << ",\n";
  os << "  \"n\": " << actor.k.cols() << ",\n";
  os << "  \"budget_s\": " << actor.budget_s << ",\n";
  os << "  \"card_off\": " << card_off(actor.k, blocks) << ",\n";
  os << "  \"support_frozen\": " << (actor.support_frozen ? "true" : "false") << ",\n";
  os << "  \"K\": " << matrix_to_json_text(actor.k, 2) << ",\n";
  os << "  \"support\": [";
  bool first = true;
  for (Eigen::Index r = 0; r < actor.k.rows(); ++r) {
    for (Eigen::Index c = 0; c < actor.k.cols(); ++c) {
      if (actor.support.size() && actor.support(r, c)) {
        os << (first ? "" : ", ") << "[" << r << ", " << c << "]";
        first = false;
      }
    }
  }
  os << "]\n}\n";
  return os.str();
}

Matrix actor_gain_from_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("malformed actor file: ") + e.what());
  }
  if (!doc.contains("K") || !doc["K"].is_array()) throw Error(ErrorCode::Parse, "actor file lacks K");
  const auto& rows = doc["K"];
  const auto m = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index n = m > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Matrix k(m, n);
  for (Eigen::Index r = 0; r < m; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != n)
      throw Error(ErrorCode::DimensionMismatch, "ragged K in actor file");
    for (Eigen::Index c = 0; c < n; ++c) k(r, c) = rows[r][c].get<double>();
  }
  return k;
}

}  // namespace wacrl
