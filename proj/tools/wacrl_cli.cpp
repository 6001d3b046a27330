#include "wacrl/cli.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Sparse wide-area damping control by actor-critic Q-learning"};
  app.require_subcommand(1);
  wacrl::CliOptions opt;

  std::string config, out, support_file, model, actual, actor;
  std::uint64_t seed = 0;
  double t_end = 0.0, sample_period = 0.0;
  int workers = 0, seed_count = 0;
  std::string eta, s;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Base seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--eta", eta, "Uncertainty level(s) in percent, comma-separated");
    sub->add_option("--s", s, "Off-diagonal budget(s), comma-separated");
    sub->add_option("--t-end", t_end, "Evaluation horizon (s)");
    sub->add_option("--sample-period", sample_period, "Learner sample period T (s)");
    sub->add_option("--support-file", support_file, "Uncertainty support file");
    sub->add_option("--model", model, "Nominal model file (default: built-in benchmark)");
  };

  auto* build = app.add_subcommand("build-model", "Write the nominal model file");
  auto* perturb = app.add_subcommand("perturb", "Draw a perturbed (actual) model");
  auto* learn = app.add_subcommand("learn", "Learn a sparse controller on a perturbed plant");
  auto* evaluate = app.add_subcommand("evaluate", "Report J for reference controllers and an actor");
  auto* compare = app.add_subcommand("compare", "Run the controller comparison matrix");
  for (auto* sub : {build, perturb, learn, evaluate, compare}) add_common(sub);
  learn->add_option("--actual", actual, "Actual plant model file (default: perturb the nominal)");
  evaluate->add_option("--actual", actual, "Actual plant model file (default: the nominal)");
  evaluate->add_option("--actor", actor, "Actor file to evaluate");
  compare->add_option("--workers", workers, "Worker threads");
  compare->add_option("--seeds", seed_count, "Number of consecutive seeds starting at --seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::string msg = e.what();
    for (auto& c : msg)
      if (c == '\n') c = ' ';
    std::cerr << "error: usage: " << msg << "\n";
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  auto given = [&](const char* flag) { return sub->count(flag) > 0; };
  if (given("--config")) opt.config = config;
  if (given("--seed")) opt.seed = seed;
  if (given("--out")) opt.out = out;
  if (given("--eta")) opt.eta = eta;
  if (given("--s")) opt.s = s;
  if (given("--t-end")) opt.t_end = t_end;
  if (given("--sample-period")) opt.sample_period = sample_period;
  if (given("--support-file")) opt.support_file = support_file;
  if (given("--model")) opt.model = model;
  if (sub->get_option_no_throw("--actual") && given("--actual")) opt.actual = actual;
  if (sub->get_option_no_throw("--actor") && given("--actor")) opt.actor = actor;
  if (sub->get_option_no_throw("--workers") && given("--workers")) opt.workers = workers;
  if (sub->get_option_no_throw("--seeds") && given("--seeds")) opt.seed_count = seed_count;

  return wacrl::run_command(sub->get_name(), opt, std::cout, std::cerr);
}
