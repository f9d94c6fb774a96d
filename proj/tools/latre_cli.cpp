// latre: simulate panels, estimate regime contrasts, replicate the
// Monte Carlo comparison, validate datasets.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "latre/harness/cli.hpp"

int main(int argc, char** argv) {
  using namespace latre::harness;

  CLI::App app{"Instrumented regime-effect estimation for multi-period panels"};
  app.require_subcommand(1);

  CliArgs args;
  std::string method;
  std::uint64_t seed = 0;
  std::size_t workers = 0, bootstrap = 0;
  double level = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "key = value configuration file");
  };

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic panel as CSV");
  add_common(sim);
  sim->add_option("--out", args.out, "Output CSV (stdout when omitted)");
  sim->add_option("--seed", seed, "Override the generator seed");

  auto* est = app.add_subcommand("estimate", "Estimate a regime contrast and print a JSON report");
  add_common(est);
  est->add_option("--data", args.data, "Input CSV")->required();
  est->add_option("--out", args.out, "Write the JSON report here instead of stdout");
  est->add_option("--method", method, "latre | naive | noiv");
  est->add_option("--seed", seed, "Bootstrap seed");
  est->add_option("--workers", workers, "Bootstrap worker threads");
  est->add_option("--bootstrap", bootstrap, "Number of bootstrap resamples (>= 100)");
  est->add_option("--level", level, "Bootstrap interval level");

  auto* rep = app.add_subcommand("replicate", "Run the Monte Carlo comparison");
  add_common(rep);
  rep->add_option("--out", args.out, "Write the JSON result here (table goes to stdout)");
  rep->add_option("--method", method, "Comma-separated subset of latre,naive,noiv");
  rep->add_option("--seed", seed, "Master seed");
  rep->add_option("--workers", workers, "Worker threads");
  rep->add_flag("--timing", args.timing, "Include wall-clock seconds in the JSON");

  auto* val = app.add_subcommand("validate", "Check a CSV dataset against the model's invariants");
  val->add_option("--data", args.data, "Input CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kInputError;
  }

  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* active = app.get_subcommands().front();
  if (active->get_option_no_throw("--method") && given(active, "--method")) args.method = method;
  if (active->get_option_no_throw("--seed") && given(active, "--seed")) args.seed = seed;
  if (active->get_option_no_throw("--workers") && given(active, "--workers")) args.workers = workers;
  if (active->get_option_no_throw("--bootstrap") && given(active, "--bootstrap")) args.bootstrap = bootstrap;
  if (active->get_option_no_throw("--level") && given(active, "--level")) args.level = level;

  if (*sim) return cmd_simulate(args, std::cout, std::cerr);
  if (*est) return cmd_estimate(args, std::cout, std::cerr);
  if (*rep) return cmd_replicate(args, std::cout, std::cerr);
  return cmd_validate(args, std::cout, std::cerr);
}
