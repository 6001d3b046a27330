#include "wacrl/harness.hpp"

#include "json_io.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

namespace wacrl {

using detail::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

constexpr std::uint64_t kStreamModel = 1;
constexpr std::uint64_t kStreamX0 = 2;
constexpr std::uint64_t kStreamLearner = 3;
constexpr std::uint64_t kStreamFresh = 100;

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int controller_rank(const std::string& name) {
  return static_cast<int>(controller_from_string(name));
}

void run_parallel(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const int threads = std::max(1, std::min<int>(workers, static_cast<int>(count)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) job(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::string run_key(const ComparisonRow& row) {
  std::ostringstream os;
  os << "eta" << fmt(row.eta) << "_seed" << row.seed << "_" << row.controller;
  if (row.s >= 0) os << "_s" << row.s;
  if (row.stage != "1") os << "_stage" << row.stage;
  return os.str();
}

void fill_gain_columns(ComparisonRow& row, const Matrix& k, const SmallSignalModel& actual,
                       const CostWeights& w, const Vector& x0, double t_end) {
  row.stable = is_hurwitz(actual.a - actual.b * k);
  row.j = evaluate_cost(actual, w, k, x0);
  row.j_finite = evaluate_cost_finite(actual, w, k, x0, t_end);
  row.card_off = card_off(k, actual.blocks);
  row.link_count = static_cast<int>(comm_graph(k, actual.blocks).size());
}

struct Job {
  std::size_t cell = 0;
  ControllerId controller = ControllerId::OpenLoop;
  int s = -1;
};

struct JobOutput {
  std::vector<ComparisonRow> rows;
  std::vector<RunArtifacts> artifacts;
};

JobOutput run_job(const ExperimentSpec& spec, const Cell& cell, const Job& job) {
  JobOutput out;
  const SmallSignalModel& actual = cell.actual;
  const CostWeights& w = spec.weights;
  const double period = spec.learner.sample_period;

  ComparisonRow row;
  row.controller = to_string(job.controller);
  row.eta = cell.eta;
  row.seed = cell.seed;
  row.model_hash = model_hash(actual);
  row.s = job.s;

  Matrix k;
  RunArtifacts art;
  try {
    switch (job.controller) {
      case ControllerId::OpenLoop:
        k = Matrix::Zero(actual.m(), actual.n());
        break;
      case ControllerId::IdealLqr:
        k = lqr_gain(actual, w);
        break;
      case ControllerId::MismatchedLqr:
        k = lqr_gain(spec.nominal, w);
        break;
      case ControllerId::DenseRl:
      case ControllerId::SparseRl: {
        LearnerConfig cfg = spec.learner;
        cfg.budget_s = job.controller == ControllerId::DenseRl ? -1 : job.s;
        cfg.seed = derive_seed(cell.seed, kStreamLearner);
        LtiPlant plant(actual, w, cell.x0, period, cfg.substeps);
        LearnResult res = learn(plant, spec.nominal, w, cfg);
        k = res.actor.k;
        row.iterations = res.iterations;
        row.learn_time = res.stop_time;
        row.converged = res.converged;
        row.diverged = res.diverged;
        row.stationarity = res.stationarity;
        row.max_card_off = res.max_card_off;
        row.diagnostic = res.diagnostic;
        row.j_learn = res.trajectory.total_cost();
        const Vector x_stop = res.trajectory.states.empty() ? cell.x0 : res.trajectory.states.back();
        row.j_post = res.diverged ? kInf : evaluate_cost(actual, w, k, x_stop);
        art.log = std::move(res.log);
        if (spec.keep_trajectories) art.trajectory = std::move(res.trajectory);
        break;
      }
    }
  } catch (const Error& e) {
    row.stable = false;
    row.j = row.j_finite = row.j_stage1 = kInf;
    row.diagnostic = e.what();
    out.rows.push_back(row);
    return out;
  }

  fill_gain_columns(row, k, actual, w, cell.x0, spec.t_end);
  if (job.controller != ControllerId::DenseRl && job.controller != ControllerId::SparseRl) {
    row.max_card_off = row.card_off;
    row.j_post = row.j;
    row.j_stage1 = row.j;
  } else {
    row.j_stage1 = row.j_learn + row.j_post;
  }
  art.key = run_key(row);
  art.k = k;
  if (spec.keep_trajectories && art.trajectory.size() == 0)
    art.trajectory = run_closed_loop(actual, k, cell.x0, w, spec.t_end, period);
  out.rows.push_back(row);
  out.artifacts.push_back(std::move(art));

  for (int r = 0; r < spec.reuse_disturbances; ++r) {
    Trajectory traj;
    ComparisonRow reuse = reuse_controller(k, actual, w, fresh_disturbance(spec, cell.seed, r),
                                           spec.t_end, period,
                                           spec.keep_trajectories ? &traj : nullptr);
    reuse.controller = row.controller;
    reuse.eta = row.eta;
    reuse.seed = row.seed;
    reuse.s = row.s;
    reuse.stage = "2." + std::to_string(r);
    RunArtifacts reuse_art;
    reuse_art.key = run_key(reuse);
    reuse_art.k = k;
    reuse_art.trajectory = std::move(traj);
    out.rows.push_back(reuse);
    out.artifacts.push_back(std::move(reuse_art));
  }
  return out;
}

}  // namespace

const char* to_string(ControllerId id) {
  switch (id) {
    case ControllerId::OpenLoop: return "open_loop";
    case ControllerId::IdealLqr: return "ideal_lqr";
    case ControllerId::MismatchedLqr: return "mismatched_lqr";
    case ControllerId::DenseRl: return "dense_rl";
    case ControllerId::SparseRl: return "sparse_rl";
  }
  return "unknown";
}

ControllerId controller_from_string(const std::string& name) {
  for (auto id : {ControllerId::OpenLoop, ControllerId::IdealLqr, ControllerId::MismatchedLqr,
                  ControllerId::DenseRl, ControllerId::SparseRl}) {
    if (name == to_string(id)) return id;
  }
  throw Error(ErrorCode::InvalidParameter, "unknown controller '" + name + "'");
}

void ExperimentSpec::validate() const {
  nominal.validate();
  weights.validate(nominal.n(), nominal.m());
  if (eta_grid.empty()) throw Error(ErrorCode::InvalidParameter, "eta grid is empty");
  if (seeds.empty()) throw Error(ErrorCode::InvalidParameter, "seed list is empty");
  if (controllers.empty()) throw Error(ErrorCode::InvalidParameter, "controller list is empty");
  if (!(t_end > 0.0) || !std::isfinite(t_end))
    throw Error(ErrorCode::InvalidParameter, "t_end must be positive");
  if (!(disturbance_magnitude >= 0.0) || !std::isfinite(disturbance_magnitude))
    throw Error(ErrorCode::InvalidParameter, "disturbance magnitude must be finite and >= 0");
  for (double eta : eta_grid)
    if (!(eta >= 0.0)) throw Error(ErrorCode::InvalidParameter, "eta must be >= 0");
  const bool sparse = std::find(controllers.begin(), controllers.end(), ControllerId::SparseRl) !=
                      controllers.end();
  if (sparse && s_grid.empty()) throw Error(ErrorCode::InvalidParameter, "s grid is empty");
  for (int s : s_grid)
    if (s < 0) throw Error(ErrorCode::InvalidParameter, "budget s must be >= 0");
  if (reuse_disturbances < 0) throw Error(ErrorCode::InvalidParameter, "reuse count must be >= 0");
  if (workers < 1) throw Error(ErrorCode::InvalidParameter, "workers must be >= 1");
  learner.validate();
}

Cell make_cell(const ExperimentSpec& spec, double eta, std::uint64_t seed) {
  UncertaintySpec u = spec.support;
  u.eta = eta;
  u.seed = derive_seed(seed, kStreamModel);
  Cell cell;
  cell.eta = eta;
  cell.seed = seed;
  cell.actual = perturb_model(spec.nominal, u);
  cell.x0 = Disturbance{spec.disturbance_magnitude, {}, derive_seed(seed, kStreamX0)}
                .draw(spec.nominal.n());
  return cell;
}

Vector fresh_disturbance(const ExperimentSpec& spec, std::uint64_t seed, int index) {
  return Disturbance{spec.disturbance_magnitude, {},
                     derive_seed(seed, kStreamFresh + static_cast<std::uint64_t>(index))}
      .draw(spec.nominal.n());
}

ComparisonRow reuse_controller(const Matrix& k, const SmallSignalModel& actual,
                               const CostWeights& w, const Vector& fresh_x0, double t_end,
                               double sample_period, Trajectory* trajectory) {
  ComparisonRow row;
  row.stage = "2";
  row.model_hash = model_hash(actual);
  fill_gain_columns(row, k, actual, w, fresh_x0, t_end);
  row.max_card_off = row.card_off;
  row.j_post = row.j;
  row.j_stage1 = row.j;
  if (trajectory) {
    *trajectory = run_closed_loop(actual, k, fresh_x0, w, t_end, sample_period);
    if (trajectory->diverged) row.stable = false;
  }
  return row;
}

MatrixResult run_matrix(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<Cell> cells;
  for (double eta : spec.eta_grid)
    for (std::uint64_t seed : spec.seeds) cells.push_back(make_cell(spec, eta, seed));

  std::vector<Job> jobs;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    for (ControllerId id : spec.controllers) {
      if (id == ControllerId::SparseRl) {
        for (int s : spec.s_grid) jobs.push_back({c, id, s});
      } else if (id == ControllerId::DenseRl) {
        jobs.push_back({c, id, spec.nominal.m() * spec.nominal.n()});
      } else {
        jobs.push_back({c, id, -1});
      }
    }
  }

  std::vector<JobOutput> outputs(jobs.size());
  run_parallel(jobs.size(), spec.workers, [&](std::size_t i) {
    try {
      outputs[i] = run_job(spec, cells[jobs[i].cell], jobs[i]);
    } catch (const std::exception& e) {
      ComparisonRow row;
      row.controller = to_string(jobs[i].controller);
      row.eta = cells[jobs[i].cell].eta;
      row.seed = cells[jobs[i].cell].seed;
      row.s = jobs[i].s;
      row.model_hash = model_hash(cells[jobs[i].cell].actual);
      row.j = row.j_finite = row.j_stage1 = kInf;
      row.diagnostic = e.what();
      outputs[i].rows.push_back(row);
    }
  });

  MatrixResult result;
  for (auto& o : outputs) {
    for (auto& r : o.rows) result.rows.push_back(std::move(r));
    for (auto& a : o.artifacts) result.artifacts.push_back(std::move(a));
  }

  // Reference J of the ideal controller per (eta, seed, stage).
  for (auto& row : result.rows) {
    double ref = std::numeric_limits<double>::quiet_NaN();
    for (const auto& other : result.rows) {
      if (other.controller == "ideal_lqr" && other.eta == row.eta && other.seed == row.seed &&
          other.stage == row.stage && other.stable)
        ref = other.j;
    }
    if (!row.stable) row.j_increase = kInf;
    else if (std::isnan(ref) || ref <= 0.0) row.j_increase = std::numeric_limits<double>::quiet_NaN();
    else row.j_increase = 100.0 * (row.j / ref - 1.0);
  }

  std::sort(result.rows.begin(), result.rows.end(), [](const ComparisonRow& a, const ComparisonRow& b) {
    return std::make_tuple(a.eta, a.seed, controller_rank(a.controller), -a.s, a.stage) <
           std::make_tuple(b.eta, b.seed, controller_rank(b.controller), -b.s, b.stage);
  });
  std::sort(result.artifacts.begin(), result.artifacts.end(),
            [](const RunArtifacts& a, const RunArtifacts& b) { return a.key < b.key; });
  return result;
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  const double lo = values[mid - 1];
  const double hi = values[mid];
  if (std::isinf(lo) || std::isinf(hi)) return std::isinf(lo) ? lo : hi;
  return 0.5 * (lo + hi);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

RankCorrelation spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "spearman: length mismatch");
  RankCorrelation out;
  out.samples = static_cast<int>(a.size());
  if (a.size() < 3) return out;
  const std::vector<double> ra = average_ranks(a);
  const std::vector<double> rb = average_ranks(b);
  const Eigen::Map<const Vector> va(ra.data(), static_cast<Eigen::Index>(ra.size()));
  const Eigen::Map<const Vector> vb(rb.data(), static_cast<Eigen::Index>(rb.size()));
  const Vector ca = va.array() - va.mean();
  const Vector cb = vb.array() - vb.mean();
  const double denom = ca.norm() * cb.norm();
  if (denom == 0.0) return out;
  out.rho = std::clamp(ca.dot(cb) / denom, -1.0, 1.0);
  const double dof = static_cast<double>(a.size()) - 2.0;
  if (std::abs(out.rho) >= 1.0) {
    out.p_value = 0.0;
    return out;
  }
  const double t = out.rho * std::sqrt(dof / (1.0 - out.rho * out.rho));
  boost::math::students_t dist(dof);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return out;
}

SweepResult sparsity_sweep(const ExperimentSpec& spec) {
  spec.validate();
  if (spec.s_grid.empty()) throw Error(ErrorCode::InvalidParameter, "s grid is empty");
  const double eta = spec.eta_grid.front();
  std::vector<Cell> cells;
  for (std::uint64_t seed : spec.seeds) cells.push_back(make_cell(spec, eta, seed));

  std::vector<std::pair<int, std::size_t>> jobs;
  for (int s : spec.s_grid)
    for (std::size_t c = 0; c < cells.size(); ++c) jobs.emplace_back(s, c);

  std::vector<SweepRow> rows(jobs.size());
  run_parallel(jobs.size(), spec.workers, [&](std::size_t i) {
    const auto [s, c] = jobs[i];
    const Cell& cell = cells[c];
    LearnerConfig cfg = spec.learner;
    cfg.budget_s = s;
    cfg.seed = derive_seed(cell.seed, kStreamLearner);
    LtiPlant plant(cell.actual, spec.weights, cell.x0, cfg.sample_period, cfg.substeps);
    SweepRow row;
    row.s = s;
    row.seed = cell.seed;
    try {
      LearnResult res = learn(plant, spec.nominal, spec.weights, cfg);
      row.j = evaluate_cost(cell.actual, spec.weights, res.actor.k, cell.x0);
      row.card_off = card_off(res.actor.k, cell.actual.blocks);
      row.link_count = static_cast<int>(comm_graph(res.actor.k, cell.actual.blocks).size());
      row.converged = res.converged;
      row.iterations = res.converged ? res.iterations : cfg.max_iters;
      row.max_card_off = res.max_card_off;
      row.stationarity = res.stationarity;
    } catch (const Error&) {
      row.j = kInf;
      row.iterations = cfg.max_iters;
    }
    rows[i] = row;
  });

  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::make_tuple(-a.s, a.seed) < std::make_tuple(-b.s, b.seed);
  });

  SweepResult out;
  out.rows = rows;
  std::vector<double> s_col, j_col, it_col;
  for (const auto& r : rows) {
    s_col.push_back(r.s);
    j_col.push_back(r.j);
    it_col.push_back(r.iterations);
    if (out.s_values.empty() || out.s_values.back() != r.s) out.s_values.push_back(r.s);
  }
  for (int s : out.s_values) {
    std::vector<double> js, its;
    for (const auto& r : rows) {
      if (r.s != s) continue;
      js.push_back(r.j);
      its.push_back(r.iterations);
    }
    out.median_j.push_back(median(js));
    out.median_iterations.push_back(median(its));
  }
  out.j_vs_s = spearman(s_col, j_col);
  out.iterations_vs_s = spearman(s_col, it_col);
  return out;
}

std::string comparison_to_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream os;
  os << "controller,stage,eta,s,seed,model_hash,stable,J,J_increase_pct,J_finite,J_learn,J_post,"
        "J_stage1,iterations,learn_time,converged,diverged,stationarity,card_off,max_card_off,"
        "link_count,diagnostic\n";
  for (const auto& r : rows) {
    std::string diag = r.diagnostic;
    std::replace(diag.begin(), diag.end(), ',', ';');
    std::replace(diag.begin(), diag.end(), '\n', ' ');
    os << r.controller << ',' << r.stage << ',' << fmt(r.eta) << ',' << r.s << ',' << r.seed << ','
       << r.model_hash << ',' << (r.stable ? 1 : 0) << ',' << fmt(r.j) << ',' << fmt(r.j_increase)
       << ',' << fmt(r.j_finite) << ',' << fmt(r.j_learn) << ',' << fmt(r.j_post) << ','
       << fmt(r.j_stage1) << ',' << r.iterations << ',' << fmt(r.learn_time) << ','
       << (r.converged ? 1 : 0) << ',' << (r.diverged ? 1 : 0) << ',' << fmt(r.stationarity) << ','
       << r.card_off << ',' << r.max_card_off << ',' << r.link_count << ',' << diag << '\n';
  }
  return os.str();
}

std::string sweep_to_csv(const SweepResult& sweep) {
  std::ostringstream os;
  os << "s,seed,J,link_count,card_off,iterations,converged\n";
  for (const auto& r : sweep.rows) {
    os << r.s << ',' << r.seed << ',' << fmt(r.j) << ',' << r.link_count << ',' << r.card_off << ','
       << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
  }
  return os.str();
}

std::string summary_report(const ExperimentSpec& spec, const MatrixResult& result) {
  std::ostringstream os;
  os << "spec " << spec_hash(spec) << "  nominal " << model_hash(spec.nominal) << "\n";
  os << "cells " << spec.eta_grid.size() * spec.seeds.size() << "  rows " << result.rows.size()
     << "\n\n";
  for (double eta : spec.eta_grid) {
    os << "eta = " << fmt(eta) << "%\n";
    std::vector<std::pair<std::string, int>> groups;
    for (const auto& r : result.rows) {
      if (r.eta != eta || r.stage != "1") continue;
      const std::pair<std::string, int> key{r.controller, r.s};
      if (std::find(groups.begin(), groups.end(), key) == groups.end()) groups.push_back(key);
    }
    char line[256];
    std::snprintf(line, sizeof(line), "  %-16s %6s %8s %10s %14s %10s %10s %10s\n", "controller", "s",
                  "stable", "converged", "median dJ[%]", "med iters", "med t2[s]", "links");
    os << line;
    for (const auto& [name, s] : groups) {
      int total = 0, stable = 0, converged = 0;
      std::vector<double> inc, its, t2, links;
      for (const auto& r : result.rows) {
        if (r.eta != eta || r.stage != "1" || r.controller != name || r.s != s) continue;
        ++total;
        stable += r.stable ? 1 : 0;
        converged += r.converged ? 1 : 0;
        inc.push_back(r.j_increase);
        its.push_back(r.iterations);
        t2.push_back(r.learn_time);
        links.push_back(r.link_count);
      }
      const bool learned = name == "dense_rl" || name == "sparse_rl";
      std::snprintf(line, sizeof(line), "  %-16s %6s %4d/%-3d %10s %14s %10s %10s %10s\n", name.c_str(),
                    s >= 0 ? std::to_string(s).c_str() : "-", stable, total,
                    learned ? (std::to_string(converged) + "/" + std::to_string(total)).c_str() : "-",
                    fmt(median(inc)).c_str(), learned ? fmt(median(its)).c_str() : "-",
                    learned ? fmt(median(t2)).c_str() : "-", fmt(median(links)).c_str());
      os << line;
    }
    int reuse_total = 0, reuse_stable = 0;
    for (const auto& r : result.rows) {
      if (r.eta != eta || r.stage == "1") continue;
      if (r.controller != "dense_rl" && r.controller != "sparse_rl") continue;
      ++reuse_total;
      reuse_stable += r.stable ? 1 : 0;
    }
    os << "  stage 2 (learned gains on fresh disturbances): " << reuse_stable << "/" << reuse_total
       << " stable\n\n";
  }
  return os.str();
}

std::string spec_to_text(const ExperimentSpec& spec) {
  json doc;
  doc["format"] = "wacrl-experiment";
  doc["rng"] = Rng::kAlgorithm;
  doc["nominal_hash"] = model_hash(spec.nominal);
  doc["weights"] = detail::weights_to_json(spec.weights);
  doc["eta_grid"] = spec.eta_grid;
  doc["s_grid"] = spec.s_grid;
  doc["seeds"] = spec.seeds;
  std::vector<std::string> names;
  for (auto id : spec.controllers) names.emplace_back(to_string(id));
  doc["controllers"] = names;
  doc["t_end"] = spec.t_end;
  doc["disturbance_magnitude"] = spec.disturbance_magnitude;
  doc["support_a"] = spec.support.support_a;
  doc["support_b"] = spec.support.support_b;
  doc["learner"] = detail::learner_to_json(spec.learner);
  doc["reuse_disturbances"] = spec.reuse_disturbances;
  return doc.dump(2) + "\n";
}

std::string spec_hash(const ExperimentSpec& spec) {
  const std::string text = spec_to_text(spec);
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::filesystem::path write_run(const std::filesystem::path& root, const ExperimentSpec& spec,
                                const MatrixResult& result) {
  namespace fs = std::filesystem;
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%dT%H%M%SZ", &tm);

  const std::string hash = spec_hash(spec);
  fs::path dir = root / (hash + "-" + stamp);
  for (int i = 1; fs::exists(dir); ++i) dir = root / (hash + "-" + stamp + "-" + std::to_string(i));
  std::error_code ec;
  fs::create_directories(dir / "trajectories", ec);
  if (!ec) fs::create_directories(dir / "logs", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create run directory " + dir.string() + ": " + ec.message());

  write_file_atomic(dir / "spec.json", spec_to_text(spec));
  save_model(spec.nominal, dir / "nominal_model.json");
  write_file_atomic(dir / "comparison.csv", comparison_to_csv(result.rows));
  write_file_atomic(dir / "summary.txt", summary_report(spec, result));
  for (const auto& art : result.artifacts) {
    if (art.trajectory.size() > 0)
      write_file_atomic(dir / "trajectories" / (art.key + ".csv"), trajectory_to_csv(art.trajectory));
    if (!art.log.empty())
      write_file_atomic(dir / "logs" / (art.key + ".csv"), learn_log_to_csv(art.log));
  }

  json meta;
  meta["spec_hash"] = hash;
  meta["created_utc"] = stamp;
  meta["rng"] = Rng::kAlgorithm;
  meta["rows"] = result.rows.size();
  write_file_atomic(dir / "metadata.json", meta.dump(2) + "\n");
  return dir;
}

}  // namespace wacrl
