#include "wacrl/cli.hpp"

#include "json_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace wacrl {

using detail::check_keys;
using detail::json;
using detail::required;

namespace {

namespace fs = std::filesystem;

json parse_config_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw Error(ErrorCode::Parse, "config line " + std::to_string(line) + ": malformed JSON");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
}

void apply_options(json& doc, const CliOptions& o) {
  if (o.model) doc["model"] = fs::absolute(*o.model).string();
  if (o.seed) doc["seed"] = *o.seed;
  if (o.out) doc["out"] = o.out->string();
  if (o.eta) {
    const auto etas = parse_double_list(*o.eta, "--eta");
    doc["experiment"]["eta_grid"] = etas;
    doc["uncertainty"]["eta"] = etas.front();
  }
  if (o.s) {
    const auto ss = parse_int_list(*o.s, "--s");
    doc["experiment"]["s_grid"] = ss;
    doc["learner"]["budget_s"] = ss.front();
  }
  if (o.t_end) doc["experiment"]["t_end"] = *o.t_end;
  if (o.sample_period) doc["learner"]["sample_period"] = *o.sample_period;
  if (o.support_file) doc["uncertainty"]["support_file"] = fs::absolute(*o.support_file).string();
  if (o.workers) doc["experiment"]["workers"] = *o.workers;
  if (o.seed_count) doc["experiment"]["seed_count"] = *o.seed_count;
}

CostWeights weights_from_json(const json& node, const SmallSignalModel& model) {
  if (node.is_null() || (node.is_string() && node.get<std::string>() == "benchmark"))
    return benchmark_weights(model);
  if (!node.is_object()) throw Error(ErrorCode::Parse, "weights: expected \"benchmark\" or an object");
  check_keys(node, {"q_scale", "r_scale", "q", "r", "angle", "speed", "actuator"}, "weights");
  if (node.contains("q") || node.contains("r")) {
    if (!node.contains("q") || !node.contains("r"))
      throw Error(ErrorCode::Parse, "weights: both 'q' and 'r' are required");
    CostWeights w{detail::matrix_from_json(node["q"], model.n(), model.n(), "weights.q"),
                  detail::matrix_from_json(node["r"], model.m(), model.m(), "weights.r")};
    w.validate(model.n(), model.m());
    return w;
  }
  if (node.contains("angle") || node.contains("speed") || node.contains("actuator")) {
    return swing_weights(model, node.value("angle", 1000.0), node.value("speed", 1000.0),
                         node.value("actuator", 0.0), node.value("r_scale", 0.01));
  }
  CostWeights w = CostWeights::identity(model.n(), model.m(), node.value("q_scale", 1.0),
                                        node.value("r_scale", 1.0));
  w.validate(model.n(), model.m());
  return w;
}

RunConfig build_config(const json& doc, const fs::path& base) {
  check_keys(doc, {"model", "weights", "learner", "uncertainty", "experiment", "seed", "out"}, "config");
  RunConfig cfg;

  if (doc.contains("model") && doc["model"] != "benchmark") {
    const fs::path path = resolve(base, required<std::string>(doc, "model"));
    cfg.nominal = load_model(path);
    cfg.model_source = path.string();
  } else {
    cfg.nominal = benchmark_model();
  }
  cfg.weights = weights_from_json(doc.contains("weights") ? doc["weights"] : json(), cfg.nominal);

  if (doc.contains("learner")) detail::learner_from_json(doc["learner"], cfg.learner);
  if (doc.contains("seed")) cfg.seed = required<std::uint64_t>(doc, "seed");
  if (doc.contains("out")) cfg.out = resolve(base, required<std::string>(doc, "out"));

  cfg.uncertainty = default_support(cfg.nominal);
  if (doc.contains("uncertainty")) {
    const json& u = doc["uncertainty"];
    check_keys(u, {"eta", "support_file", "support_a", "support_b"}, "uncertainty");
    if (u.contains("support_file")) {
      const fs::path path = resolve(base, required<std::string>(u, "support_file"));
      const UncertaintySpec file = uncertainty_from_text(read_file(path));
      cfg.uncertainty.support_a = file.support_a;
      cfg.uncertainty.support_b = file.support_b;
      cfg.uncertainty.eta = file.eta;
    }
    try {
      if (u.contains("support_a")) cfg.uncertainty.support_a = u["support_a"].get<std::vector<Index2>>();
      if (u.contains("support_b")) cfg.uncertainty.support_b = u["support_b"].get<std::vector<Index2>>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, std::string("uncertainty support: ") + e.what());
    }
    if (u.contains("eta")) cfg.uncertainty.eta = required<double>(u, "eta");
  }

  ExperimentSpec& ex = cfg.experiment;
  ex.nominal = cfg.nominal;
  ex.weights = cfg.weights;
  ex.learner = cfg.learner;
  ex.support = cfg.uncertainty;
  ex.s_grid = {static_cast<int>(std::lround(0.4 * cfg.nominal.m() * cfg.nominal.n()))};
  int seed_count = 1;
  bool explicit_seeds = false;
  if (doc.contains("experiment")) {
    const json& e = doc["experiment"];
    check_keys(e,
               {"eta_grid", "s_grid", "seeds", "seed_count", "controllers", "t_end",
                "disturbance_magnitude", "reuse_disturbances", "workers", "keep_trajectories"},
               "experiment");
    if (e.contains("eta_grid")) ex.eta_grid = required<std::vector<double>>(e, "eta_grid");
    if (e.contains("s_grid")) ex.s_grid = required<std::vector<int>>(e, "s_grid");
    if (e.contains("seeds")) {
      ex.seeds = required<std::vector<std::uint64_t>>(e, "seeds");
      explicit_seeds = true;
    }
    if (e.contains("seed_count")) seed_count = required<int>(e, "seed_count");
    if (e.contains("controllers")) {
      ex.controllers.clear();
      for (const auto& name : required<std::vector<std::string>>(e, "controllers"))
        ex.controllers.push_back(controller_from_string(name));
    }
    if (e.contains("t_end")) ex.t_end = required<double>(e, "t_end");
    if (e.contains("disturbance_magnitude"))
      ex.disturbance_magnitude = required<double>(e, "disturbance_magnitude");
    if (e.contains("reuse_disturbances")) ex.reuse_disturbances = required<int>(e, "reuse_disturbances");
    if (e.contains("workers")) ex.workers = required<int>(e, "workers");
    if (e.contains("keep_trajectories")) ex.keep_trajectories = required<bool>(e, "keep_trajectories");
  }
  if (seed_count < 1) throw Error(ErrorCode::Parse, "experiment.seed_count must be >= 1");
  if (!explicit_seeds && cfg.seed) {
    ex.seeds.clear();
    for (int i = 0; i < seed_count; ++i) ex.seeds.push_back(*cfg.seed + static_cast<std::uint64_t>(i));
  }
  if (!(doc.contains("uncertainty") && doc["uncertainty"].contains("eta")) && !ex.eta_grid.empty())
    cfg.uncertainty.eta = ex.eta_grid.front();
  ex.support.eta = cfg.uncertainty.eta;

  cfg.uncertainty.validate(cfg.nominal);
  cfg.learner.validate();
  return cfg;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, const char* what, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    std::size_t used = 0;
    T value{};
    try {
      value = parse(item, &used);
    } catch (const std::exception&) {
      used = std::string::npos;
    }
    if (item.empty() || used != item.size())
      throw Error(ErrorCode::Parse, std::string(what) + ": bad list element '" + item + "'");
    out.push_back(value);
  }
  if (out.empty()) throw Error(ErrorCode::Parse, std::string(what) + ": empty list");
  return out;
}

std::uint64_t require_seed(const RunConfig& cfg, const char* command) {
  if (!cfg.seed)
    throw Error(ErrorCode::InvalidParameter, std::string(command) + " requires --seed (or \"seed\" in the config)");
  return *cfg.seed;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
}

json gain_report(const SmallSignalModel& actual, const CostWeights& w, const Matrix& k,
                 const Vector& x0, double t_end) {
  return json{{"stable", is_hurwitz(actual.a - actual.b * k)},
              {"spectral_abscissa", spectral_abscissa(actual.a - actual.b * k)},
              {"J", number_or_inf(evaluate_cost(actual, w, k, x0))},
              {"J_finite", number_or_inf(evaluate_cost_finite(actual, w, k, x0, t_end))},
              {"card_off", card_off(k, actual.blocks)},
              {"link_count", comm_graph(k, actual.blocks).size()}};
}

Actor full_actor(const Matrix& k) {
  Actor a;
  a.k = k;
  a.support = (k.array() != 0.0);
  a.budget_s = static_cast<int>(k.size());
  return a;
}

int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << to_string(e.code()) << ": " << msg << "\n";
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: internal: " << msg << "\n";
  }
  return 1;
}

}  // namespace

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  return parse_list<double>(text, what, [](const std::string& s, std::size_t* used) { return std::stod(s, used); });
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  return parse_list<int>(text, what, [](const std::string& s, std::size_t* used) { return std::stoi(s, used); });
}

RunConfig run_config_from_text(const std::string& text, const fs::path& base_dir,
                               const CliOptions& options) {
  json doc = parse_config_text(text);
  if (!doc.is_object()) throw Error(ErrorCode::Parse, "config: expected a JSON object");
  apply_options(doc, options);
  return build_config(doc, base_dir);
}

RunConfig load_run_config(const CliOptions& options) {
  if (!options.config) {
    json doc = json::object();
    apply_options(doc, options);
    return build_config(doc, fs::current_path());
  }
  const std::string text = read_file(*options.config);
  return run_config_from_text(text, fs::absolute(*options.config).parent_path(), options);
}

int cmd_build_model(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(options);
    ensure_dir(cfg.out);
    const fs::path path = cfg.out / "model.json";
    save_model(cfg.nominal, path);
    out << "model " << path.string() << " n=" << cfg.nominal.n() << " m=" << cfg.nominal.m()
        << " n_g=" << cfg.nominal.blocks.gen_count << " hash=" << model_hash(cfg.nominal) << "\n";
  });
}

int cmd_perturb(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(options);
    const std::uint64_t seed = require_seed(cfg, "perturb");
    ExperimentSpec spec = cfg.experiment;
    spec.support = cfg.uncertainty;
    const Cell cell = make_cell(spec, cfg.uncertainty.eta, seed);
    UncertaintySpec used = cfg.uncertainty;
    used.seed = derive_seed(seed, 1);
    ensure_dir(cfg.out);
    save_model(cell.actual, cfg.out / "model.json");
    write_file_atomic(cfg.out / "uncertainty.json", uncertainty_to_text(used));
    out << "perturbed " << (cfg.out / "model.json").string() << " eta=" << cfg.uncertainty.eta
        << " seed=" << seed << " |support_a|=" << used.support_a.size()
        << " |support_b|=" << used.support_b.size() << " hash=" << model_hash(cell.actual) << "\n";
  });
}

int cmd_learn(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(options);
    const std::uint64_t seed = require_seed(cfg, "learn");
    ExperimentSpec spec = cfg.experiment;
    Cell cell = make_cell(spec, cfg.uncertainty.eta, seed);
    if (options.actual) cell.actual = load_model(*options.actual);
    if (!(cell.actual.blocks == cfg.nominal.blocks))
      throw Error(ErrorCode::DimensionMismatch, "actual model block structure differs from the nominal");

    LearnerConfig lc = cfg.learner;
    lc.seed = seed;
    if (const std::string warning = lc.validate(); !warning.empty()) err << "warning: " << warning << "\n";
    LtiPlant plant(cell.actual, cfg.weights, cell.x0, lc.sample_period, lc.substeps);
    const LearnResult res = learn(plant, cfg.nominal, cfg.weights, lc);

    ensure_dir(cfg.out);
    write_file_atomic(cfg.out / "actor.json", actor_to_text(res.actor, cfg.nominal.blocks));
    write_file_atomic(cfg.out / "learn_log.csv", learn_log_to_csv(res.log));
    write_file_atomic(cfg.out / "trajectory.csv", trajectory_to_csv(res.trajectory));
    json summary = gain_report(cell.actual, cfg.weights, res.actor.k, cell.x0, spec.t_end);
    summary["converged"] = res.converged;
    summary["diverged"] = res.diverged;
    summary["iterations"] = res.iterations;
    summary["stop_time"] = res.stop_time;
    summary["phase2_time"] = res.phase2_time;
    summary["stationarity"] = res.stationarity;
    summary["max_card_off"] = res.max_card_off;
    summary["budget_s"] = res.actor.budget_s;
    summary["eta"] = cfg.uncertainty.eta;
    summary["seed"] = seed;
    summary["actual_hash"] = model_hash(cell.actual);
    summary["nominal_hash"] = model_hash(cfg.nominal);
    summary["diagnostic"] = res.diagnostic;
    write_file_atomic(cfg.out / "learn_summary.json", summary.dump(2) + "\n");
    out << "learn converged=" << res.converged << " diverged=" << res.diverged
        << " iterations=" << res.iterations << " card_off=" << card_off(res.actor.k, cfg.nominal.blocks)
        << " J=" << summary["J"].dump() << " actor=" << (cfg.out / "actor.json").string() << "\n";
    if (!res.diagnostic.empty()) err << "warning: " << res.diagnostic << "\n";
  });
}

int cmd_evaluate(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(options);
    const SmallSignalModel actual = options.actual ? load_model(*options.actual) : cfg.nominal;
    if (!(actual.blocks == cfg.nominal.blocks))
      throw Error(ErrorCode::DimensionMismatch, "actual model block structure differs from the nominal");
    const std::uint64_t seed = cfg.seed.value_or(0);
    const Vector x0 =
        Disturbance{cfg.experiment.disturbance_magnitude, {}, derive_seed(seed, 2)}.draw(actual.n());
    const double t_end = cfg.experiment.t_end;

    json report;
    report["actual_hash"] = model_hash(actual);
    report["nominal_hash"] = model_hash(cfg.nominal);
    report["seed"] = seed;
    report["open_loop"] = gain_report(actual, cfg.weights, Matrix::Zero(actual.m(), actual.n()), x0, t_end);
    ensure_dir(cfg.out);
    try {
      const Matrix k_ideal = lqr_gain(actual, cfg.weights);
      report["ideal_lqr"] = gain_report(actual, cfg.weights, k_ideal, x0, t_end);
      write_file_atomic(cfg.out / "ideal_actor.json", actor_to_text(full_actor(k_ideal), actual.blocks));
    } catch (const Error& e) {
      report["ideal_lqr"] = json{{"error", e.what()}};
    }
    const Matrix k_nom = lqr_gain(cfg.nominal, cfg.weights);
    report["mismatched_lqr"] = gain_report(actual, cfg.weights, k_nom, x0, t_end);
    if (options.actor) {
      const Matrix k = actor_gain_from_text(read_file(*options.actor));
      if (k.rows() != actual.m() || k.cols() != actual.n())
        throw Error(ErrorCode::DimensionMismatch, "actor gain does not match the model");
      report["actor"] = gain_report(actual, cfg.weights, k, x0, t_end);
      report["actor"]["path"] = options.actor->string();
    }
    write_file_atomic(cfg.out / "evaluation.json", report.dump(2) + "\n");
    for (const char* key : {"open_loop", "ideal_lqr", "mismatched_lqr", "actor"}) {
      if (!report.contains(key)) continue;
      const json& r = report[key];
      out << key;
      if (r.contains("error")) out << " error=" << r["error"].get<std::string>() << "\n";
      else out << " stable=" << r["stable"].dump() << " J=" << r["J"].dump() << " J_finite=" << r["J_finite"].dump()
               << " card_off=" << r["card_off"].dump() << "\n";
    }
  });
}

int cmd_compare(const CliOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const RunConfig cfg = load_run_config(options);
    require_seed(cfg, "compare");
    ensure_dir(cfg.out);
    const MatrixResult result = run_matrix(cfg.experiment);
    const fs::path dir = write_run(cfg.out, cfg.experiment, result);
    out << summary_report(cfg.experiment, result);
    out << "run directory " << dir.string() << "\n";
  });
}

int run_command(const std::string& name, const CliOptions& options, std::ostream& out,
                std::ostream& err) {
  if (name == "build-model") return cmd_build_model(options, out, err);
  if (name == "perturb") return cmd_perturb(options, out, err);
  if (name == "learn") return cmd_learn(options, out, err);
  if (name == "evaluate") return cmd_evaluate(options, out, err);
  if (name == "compare") return cmd_compare(options, out, err);
  err << "error: usage: unknown command '" << name << "'\n";
  return 2;
}

}  // namespace wacrl
