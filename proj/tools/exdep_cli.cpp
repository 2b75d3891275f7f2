// exdep: tail dependence estimation, decomposition and failure probabilities.

#include "exdep/cli_io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

using namespace exdep;

int main(int argc, char** argv) {
  CLI::App app{"Tail pairwise dependence: estimation, decomposition, failure probabilities"};
  app.require_subcommand(1);
  app.fallthrough();

  PipelineConfig cfg;
  std::string out_path;
  std::string strategy = "pragmatic";
  double alpha = 0.0;
  bool pooled = false;

  app.add_option("--alpha", alpha, "Fixed tail index (overrides estimation)");
  app.add_option("--quantile-level", cfg.quantile_level, "Radial quantile level for r0")
      ->capture_default_str();
  app.add_option("--gpd-level", cfg.gpd_level, "Threshold level for the GPD tail fit")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for random choices and simulation")
      ->capture_default_str();
  app.add_option("--n-decompositions", cfg.n_decompositions, "Exact decompositions to collect")
      ->capture_default_str();
  app.add_option("--max-restarts", cfg.max_restarts, "Restart budget of the pragmatic search")
      ->capture_default_str();
  app.add_option("--strategy", strategy, "Path search strategy")
      ->check(CLI::IsMember({"simple", "exhaustive", "pragmatic", "enumerate"}))
      ->capture_default_str();
  app.add_option("--gap-threshold", cfg.gap_threshold, "Frobenius gap for approximate counts")
      ->capture_default_str();
  app.add_flag("--standardize", cfg.standardize, "Standardize margins to Frechet(2) first");
  app.add_flag("--pooled", pooled, "Pool all columns for the tail index");
  app.add_option("--threads", cfg.threads, "Worker threads")->capture_default_str();
  app.add_option("--out", out_path, "Write the JSON report here instead of stdout");

  std::string input;
  std::string region;
  std::size_t n_sim = 100000;

  auto* margins = app.add_subcommand("margins", "Tail index and GPD fit per column");
  margins->add_option("csv", input, "Input CSV")->required();
  margins->add_option("--standardized-out", cfg.standardized_csv,
                      "Also write the Frechet(2)-standardized data");

  auto* tpdm = app.add_subcommand("tpdm", "Estimate the TPDM and the mass stability table");
  tpdm->add_option("csv", input, "Input CSV")->required();
  tpdm->add_flag("--with-factor", cfg.include_factor, "Embed the empirical factor matrix");
  tpdm->add_option("--sigma-csv", cfg.sigma_csv, "Also write the TPDM as CSV");

  auto* decompose = app.add_subcommand("decompose", "Collect exact decompositions of a TPDM");
  decompose->add_option("tpdm", input, "TPDM JSON (from tpdm) or d x d CSV")->required();

  auto* prob = app.add_subcommand("prob", "Failure probabilities from decompositions");
  prob->add_option("decompositions", input, "Output of decompose")->required();
  prob->add_option("region", region, "Region JSON")->required();
  prob->add_option("--data", cfg.data_csv, "Data CSV for the empirical estimate");
  prob->add_option("--summary-csv", cfg.summary_csv, "Write summary statistics as CSV");

  auto* sim = app.add_subcommand("simulate", "Simulate a max-linear model");
  sim->add_option("model", input, "Model JSON {alpha, A} or coefficient CSV")->required();
  sim->add_option("--n", n_sim, "Number of rows")->capture_default_str();
  sim->add_option("--data", cfg.data_csv, "Output CSV")->required();

  auto* repro = app.add_subcommand("reproduce-synthetic", "Path census on the bundled matrices");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInput;
  }

  if (alpha > 0.0) {
    cfg.alpha_mode = AlphaMode::Fixed;
    cfg.alpha = alpha;
  } else if (pooled) {
    cfg.alpha_mode = AlphaMode::Pooled;
  }
  if (cfg.threads < 1) cfg.threads = 1;

  CommandResult result;
  try {
    cfg.strategy = strategy_from_string(strategy);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  if (margins->parsed()) {
    result = cmd_margins(input, cfg);
  } else if (tpdm->parsed()) {
    result = cmd_tpdm(input, cfg);
  } else if (decompose->parsed()) {
    result = cmd_decompose(input, cfg);
  } else if (prob->parsed()) {
    result = cmd_prob(input, region, cfg);
  } else if (sim->parsed()) {
    result = cmd_simulate(input, n_sim, cfg);
  } else if (repro->parsed()) {
    result = cmd_reproduce_synthetic(cfg);
  }

  if (!result.message.empty()) std::cerr << (result.exit_code ? "error: " : "") << result.message << '\n';
  if (!result.report.empty()) {
    const auto text = result.report.dump(2) + "\n";
    if (out_path.empty()) {
      std::cout << text;
    } else {
      try {
        write_text_file(out_path, text);
      } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
      }
    }
  }
  return result.exit_code;
}
