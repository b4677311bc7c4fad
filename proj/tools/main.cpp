// Command-line front end: generate/load data, fit maximum-entropy models,
// query itemset frequencies, and run the evaluation pipeline.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "entrank/dataset.hpp"
#include "entrank/eval.hpp"
#include "entrank/maxent.hpp"
#include "entrank/statistics.hpp"

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNotConverged = 4;

struct RunConfig {
  std::string input;
  std::string output;
  std::string test_path;
  std::string out_dir = ".";
  std::string stat = "margins";
  std::vector<std::string> stats = {"margins", "lazarus", "bounds"};
  std::string format = "csv";
  std::string kind;
  int n_attributes = 0;
  int n_rows = 0;
  double tolerance = 1e-6;
  int max_sweeps = 1000;
  std::uint64_t seed = 0;
  std::size_t top_k = 10000;
  double split_fraction = 0.0;
  double prune_freq = 0.0;
  bool drop_empty = false;
  bool pin_constant_columns = false;
  int threads = 1;
};

entrank::Dataset load_input(const RunConfig& cfg, const std::string& path) {
  entrank::Dataset d = entrank::load_fimi(path);
  if (cfg.prune_freq > 0.0) d = entrank::prune_rare_items(d, cfg.prune_freq);
  if (cfg.drop_empty) d = entrank::drop_empty_transactions(d);
  return d;
}

entrank::FitConfig fit_config(const RunConfig& cfg) {
  entrank::FitConfig fc;
  fc.tolerance = cfg.tolerance;
  fc.max_sweeps = cfg.max_sweeps;
  fc.exclude_degenerate = cfg.pin_constant_columns;
  return fc;
}

void write_model_file(const entrank::MaxEntModel& model, const std::vector<long>& labels,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw entrank::DataError("cannot open file for writing: " + path);
  entrank::serialize(model, out);
  out << "labels";
  for (long l : labels) out << ' ' << l;
  out << '\n';
  if (!out) throw entrank::DataError("write failed: " + path);
}

entrank::MaxEntModel read_model_file(const std::string& path, std::vector<long>& labels) {
  std::ifstream in(path);
  if (!in) throw entrank::DataError("cannot open file: " + path);
  entrank::MaxEntModel model = entrank::deserialize(in);
  labels.clear();
  std::string tag;
  if (in >> tag && tag == "labels") {
    long l = 0;
    while (in >> l) labels.push_back(l);
  }
  if (labels.empty())
    for (int i = 1; i <= model.n_attributes(); ++i) labels.push_back(i);
  return model;
}

int cmd_generate(const RunConfig& cfg) {
  const auto kind = entrank::generator_kind_from_token(cfg.kind);
  const entrank::Dataset d =
      entrank::generate_synthetic(kind, cfg.n_attributes, cfg.n_rows, cfg.seed);
  entrank::save_fimi(d, cfg.output);
  std::cout << "wrote " << cfg.output << ": N=" << d.n_attributes << " |D|=" << d.size()
            << " mean_row_margin=" << std::setprecision(6) << entrank::mean_row_margin(d) << '\n';
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  const entrank::Dataset d = load_input(cfg, cfg.input);
  const entrank::Statistic stat = entrank::Statistic::from_token(cfg.stat, d.n_attributes);
  const auto constraints = entrank::Constraints::from_dataset(d, stat);

  const auto start = std::chrono::steady_clock::now();
  const entrank::MaxEntModel model = entrank::fit(constraints, fit_config(cfg));
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  write_model_file(model, d.attribute_labels, cfg.output);
  std::cout << "stat=" << stat.token() << " iterations=" << model.diagnostics.sweeps
            << " wall_time=" << std::setprecision(4) << elapsed << "s"
            << " final_residual=" << std::setprecision(4) << std::scientific
            << model.diagnostics.max_residual << std::defaultfloat
            << (model.diagnostics.converged ? "" : " NOT-CONVERGED") << '\n';
  return model.diagnostics.converged ? 0 : kExitNotConverged;
}

int cmd_query(const RunConfig& cfg, const std::vector<long>& items) {
  std::vector<long> labels;
  const entrank::MaxEntModel model = read_model_file(cfg.input, labels);
  std::vector<int> itemset;
  for (long item : items) {
    const auto it = std::find(labels.begin(), labels.end(), item);
    if (it == labels.end())
      throw entrank::DataError("unknown label: " + std::to_string(item));
    itemset.push_back(static_cast<int>(it - labels.begin()));
  }
  std::cout << std::setprecision(10) << entrank::query_itemset(model, itemset) << '\n';
  return 0;
}

int cmd_evaluate(const RunConfig& cfg) {
  entrank::Dataset train;
  entrank::Dataset test;
  if (!cfg.test_path.empty()) {
    train = load_input(cfg, cfg.input);
    test = load_input(cfg, cfg.test_path);
  } else {
    const double fraction = cfg.split_fraction > 0.0 ? cfg.split_fraction : 0.5;
    const entrank::Dataset full = load_input(cfg, cfg.input);
    auto parts = entrank::split(full, fraction, cfg.seed);
    train = std::move(parts.train);
    test = std::move(parts.test);
  }
  if (train.n_attributes != test.n_attributes)
    throw entrank::DataError("train and test attribute counts differ");

  std::filesystem::create_directories(cfg.out_dir);
  const bool json = cfg.format == "json";
  const std::string ext = json ? ".json" : ".csv";
  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(cfg.out_dir) / (name + ext)).string();
  };
  const auto open_out = [](const std::string& path) {
    std::ofstream out(path);
    if (!out) throw entrank::DataError("cannot open file for writing: " + path);
    return out;
  };

  const auto mined = entrank::mine_closed_frequent(test, cfg.top_k);
  if (mined.empty()) throw entrank::DataError("no closed itemsets found in the test data");
  std::cout << "mined " << mined.size() << " closed itemsets from |D_test|=" << test.size() << '\n';

  const entrank::MaxEntModel independence = entrank::fit(
      entrank::Constraints::from_dataset(train, entrank::Statistic::constant(train.n_attributes)),
      fit_config(cfg));

  std::vector<std::pair<std::string, entrank::BicReport>> bic_rows;
  bic_rows.emplace_back("independence", entrank::bic(independence, train));

  bool all_converged = independence.diagnostics.converged;
  std::cout << std::setprecision(6);
  for (const std::string& token : cfg.stats) {
    if (token == "independence") continue;  // always present as the baseline
    const entrank::Statistic stat = entrank::Statistic::from_token(token, train.n_attributes);
    const entrank::MaxEntModel model =
        entrank::fit(entrank::Constraints::from_dataset(train, stat), fit_config(cfg));
    all_converged = all_converged && model.diagnostics.converged;
    bic_rows.emplace_back(token, entrank::bic(model, train));

    const auto scores = entrank::score_itemsets(model, independence, mined, test, cfg.threads);
    double mean_abs = 0.0, mean_rel = 0.0, mean_ll = 0.0;
    for (const auto& s : scores) {
      mean_abs += s.abs_error;
      mean_rel += s.rel_error;
      mean_ll += s.ll_improvement;
    }
    const double n = static_cast<double>(scores.size());
    std::cout << token << ": iterations=" << model.diagnostics.sweeps
              << " mean_abs_err=" << mean_abs / n << " mean_rel_err=" << mean_rel / n
              << " mean_ll_improvement=" << mean_ll / n << '\n';

    auto out = open_out(out_path("itemsets_" + token));
    const auto ranked = entrank::rank(scores, entrank::RankKey::ll_improvement);
    if (json)
      entrank::write_scores_json(out, ranked, test.attribute_labels);
    else
      entrank::write_scores_csv(out, ranked, test.attribute_labels);
  }

  {
    const auto scores = entrank::score_itemsets(independence, independence, mined, test, cfg.threads);
    auto out = open_out(out_path("itemsets_independence"));
    const auto ranked = entrank::rank(scores, entrank::RankKey::abs_error);
    if (json)
      entrank::write_scores_json(out, ranked, test.attribute_labels);
    else
      entrank::write_scores_csv(out, ranked, test.attribute_labels);
  }
  {
    auto out = open_out(out_path("bic"));
    if (json)
      entrank::write_bic_json(out, bic_rows);
    else
      entrank::write_bic_csv(out, bic_rows);
  }
  std::cout << "reports written to " << cfg.out_dir << '\n';
  return all_converged ? 0 : kExitNotConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maximum-entropy models of binary transaction data for itemset ranking"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset and write it as FIMI text");
  gen->add_option("kind", cfg.kind, "independent|clusters|markov")
      ->required()
      ->check(CLI::IsMember({"independent", "clusters", "markov"}));
  gen->add_option("-n,--attributes", cfg.n_attributes, "number of attributes")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("-r,--rows", cfg.n_rows, "number of transactions")
      ->required()
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", cfg.seed, "random seed");
  gen->add_option("-o,--output", cfg.output, "output file")->required();

  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a FIMI dataset and write the model file");
  fit_cmd->add_option("input", cfg.input, "FIMI dataset")->required();
  fit_cmd->add_option("--stat", cfg.stat, "independence|margins|lazarus|bounds")
      ->check(CLI::IsMember({"independence", "margins", "lazarus", "bounds"}));
  fit_cmd->add_option("--tol", cfg.tolerance, "convergence tolerance")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--max-sweeps", cfg.max_sweeps, "sweep budget")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--prune-freq", cfg.prune_freq, "drop items rarer than this frequency");
  fit_cmd->add_flag("--drop-empty", cfg.drop_empty, "drop all-zero transactions after loading");
  fit_cmd->add_flag("--exclude-constant-columns", cfg.pin_constant_columns,
                    "pin all-zero/all-one columns exactly instead of clamping their margins");
  fit_cmd->add_option("-o,--output", cfg.output, "model file")->required();

  std::vector<long> query_items;
  auto* query = app.add_subcommand("query", "print the expected frequency of an itemset");
  query->add_option("model", cfg.input, "model file")->required();
  query->add_option("items", query_items, "item labels (empty itemset prints 1)");

  auto* eval_cmd = app.add_subcommand(
      "evaluate", "fit models on training data, rank closed itemsets from test data, write reports");
  eval_cmd->add_option("input", cfg.input, "FIMI dataset (training side unless --split)")->required();
  eval_cmd->add_option("--test", cfg.test_path, "explicit test dataset (otherwise --split is used)");
  eval_cmd->add_option("--split", cfg.split_fraction, "training fraction of a random split (default 0.5)")
      ->check(CLI::Range(1e-9, 1.0 - 1e-9));
  eval_cmd->add_option("--stats", cfg.stats, "models to fit next to the independence baseline")
      ->delimiter(',')
      ->check(CLI::IsMember({"independence", "margins", "lazarus", "bounds"}));
  eval_cmd->add_option("--top-k", cfg.top_k, "closed itemsets to rank");
  eval_cmd->add_option("--tol", cfg.tolerance, "convergence tolerance")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--max-sweeps", cfg.max_sweeps, "sweep budget")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--seed", cfg.seed, "split seed");
  eval_cmd->add_option("--threads", cfg.threads, "scoring threads")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--prune-freq", cfg.prune_freq, "drop items rarer than this frequency");
  eval_cmd->add_flag("--drop-empty", cfg.drop_empty, "drop all-zero transactions after loading");
  eval_cmd->add_flag("--exclude-constant-columns", cfg.pin_constant_columns,
                     "pin all-zero/all-one columns exactly instead of clamping their margins");
  eval_cmd->add_option("--out-dir", cfg.out_dir, "report directory");
  eval_cmd->add_option("--format", cfg.format, "csv|json")
      ->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_generate(cfg);
    if (fit_cmd->parsed()) return cmd_fit(cfg);
    if (query->parsed()) return cmd_query(cfg, query_items);
    if (eval_cmd->parsed()) return cmd_evaluate(cfg);
  } catch (const entrank::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return 0;
}
