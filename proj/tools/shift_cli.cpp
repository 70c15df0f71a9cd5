// Command-line front end: synth, select, baselines, analyze, grpo-check.
//
// Exit status is 0 on success and the numeric ErrorCode of the failure
// otherwise; the error name is printed on stderr as "error: <Name>: ...".

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "shift/shift.hpp"

namespace fs = std::filesystem;

namespace {

// Fails with OutputExists if any target file is already present, unless
// `force` is set. Creates the directory.
void prepare_output(const fs::path& dir, const std::vector<std::string>& files, bool force) {
  if (!force) {
    for (const auto& f : files) {
      if (fs::exists(dir / f)) {
        shift::fail(shift::ErrorCode::kOutputExists,
                    "'" + (dir / f).string() + "' exists (pass --force to overwrite)");
      }
    }
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) shift::fail(shift::ErrorCode::kIoError, "cannot create '" + dir.string() + "'");
}

void write_run(const fs::path& dir, nlohmann::json run) {
  shift::detail::write_file_bytes(dir / "run.json", run.dump(2) + "\n");
}

struct Common {
  std::string out;
  bool force = false;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

int cmd_synth(const shift::SynthParams& params, const Common& c) {
  const fs::path dir = c.out;
  std::vector<std::string> files = {"pool.json", "pool.bin", "labels.csv", "run.json"};
  if (params.samples > 0) files.push_back("rollouts.jsonl");
  prepare_output(dir, files, c.force);
  const auto synth = shift::generate_pool(params);
  shift::write_pool(synth.pool, dir / "pool.json");
  shift::detail::write_file_bytes(dir / "labels.csv", shift::synth_labels_csv(synth));
  if (params.samples > 0) shift::write_rollout_records(synth.rollouts, dir / "rollouts.jsonl");
  write_run(dir, {{"subcommand", "synth"},
                  {"n", params.n},
                  {"dim", params.dim},
                  {"layers", params.layers},
                  {"clusters", params.clusters},
                  {"samples", params.samples},
                  {"seed", params.seed}});
  std::cout << "wrote " << params.n << " instances to " << (dir / "pool.json").string() << "\n";
  return 0;
}

int cmd_select(const std::string& pool_path, const shift::SelectionConfig& config,
               const Common& c) {
  const fs::path dir = c.out;
  prepare_output(dir, {"selection.json", "selected_ids.txt", "trace.csv", "features.csv", "run.json"},
                 c.force);
  const auto pool = shift::read_pool(pool_path);
  const auto features = shift::featurize_pool(pool.records, config.variant, config.threads);
  const auto result = shift::select(features, config);
  shift::write_selection(result, dir);
  shift::detail::write_file_bytes(dir / "trace.csv", shift::trace_csv({&result, 1}, features));
  shift::detail::write_file_bytes(dir / "features.csv", shift::features_csv(features));
  write_run(dir, {{"subcommand", "select"},
                  {"pool", pool_path},
                  {"method", shift::method_name(config.method)},
                  {"variant", shift::variant_name(config.variant)},
                  {"budget", config.budget},
                  {"seed", config.seed},
                  {"threads", config.threads}});
  for (const auto& id : result.selected_ids) std::cout << id << "\n";
  return 0;
}

int cmd_baselines(const std::string& rollouts_path, const std::string& score, std::size_t budget,
                  const Common& c) {
  const fs::path dir = c.out;
  const auto kind = shift::parse_score(score);
  prepare_output(dir, {"scores.csv", "selection.json", "selected_ids.txt", "run.json"}, c.force);
  const auto records = shift::read_rollout_records(rollouts_path);
  const auto table = shift::score_table(records, kind);
  const auto result = shift::rank_and_take(table, budget);
  shift::write_score_table(table, dir / "scores.csv");
  shift::write_selection(result, dir);
  write_run(dir, {{"subcommand", "baselines"},
                  {"rollouts", rollouts_path},
                  {"score", score},
                  {"budget", budget},
                  {"seed", c.seed}});
  for (const auto& id : result.selected_ids) std::cout << id << "\n";
  return 0;
}

int cmd_analyze(bool gain_fixture, const std::string& pool_path, const std::string& rollouts_path,
                shift::FeatureVariant variant, const Common& c) {
  shift::Report report;
  if (gain_fixture) {
    report.correlations.push_back(
        shift::correlate("shift_rank_vs_pass1_gain", shift::shift_gain_fixture()));
  }
  if (!pool_path.empty()) {
    const auto pool = shift::read_pool(pool_path);
    report.features = shift::featurize_pool(pool.records, variant, c.threads);
    if (!rollouts_path.empty()) {
      const auto records = shift::read_rollout_records(rollouts_path);
      for (auto& row : shift::length_correlation(report.features, records)) {
        report.correlations.push_back(std::move(row));
      }
    }
  } else if (!rollouts_path.empty()) {
    shift::fail(shift::ErrorCode::kJoinMismatch, "--rollouts needs --pool to join against");
  }
  if (!gain_fixture && pool_path.empty()) {
    shift::fail(shift::ErrorCode::kInvalidParams, "nothing to analyze: pass --gain-fixture or --pool");
  }
  if (!c.out.empty()) {
    prepare_output(c.out,
                   {"features.csv", "trace.csv", "correlations.json", "summary.json", "run.json"},
                   c.force);
    shift::emit_report(report, c.out);
    write_run(c.out, {{"subcommand", "analyze"},
                      {"gain_fixture", gain_fixture},
                      {"pool", pool_path},
                      {"rollouts", rollouts_path},
                      {"variant", shift::variant_name(variant)},
                      {"seed", c.seed}});
  }
  for (const auto& r : report.correlations) {
    std::printf("%s n=%zu spearman=%.3f kendall=%.3f\n", r.pair.c_str(), r.n, r.spearman,
                r.kendall);
  }
  return 0;
}

int cmd_grpo_check(const std::string& fixture_path) {
  const std::string text = shift::detail::read_file_bytes(fixture_path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    shift::fail(shift::ErrorCode::kInvalidParams, std::string("fixture is not valid JSON: ") + e.what());
  }
  const auto fixture = shift::grpo::fixture_from_json(j);
  const auto terms = shift::grpo::grpo_objective(fixture.groups, fixture.params);
  std::cout << shift::grpo::terms_to_json(terms, fixture.params).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free data selection from reasoning-induced hidden-state shifts"};
  app.require_subcommand(1);

  Common common;
  auto add_output = [&](CLI::App* sub, bool required = true) {
    auto* opt = sub->add_option("--out", common.out, "Output directory");
    if (required) opt->required();
    sub->add_flag("--force", common.force, "Overwrite existing output files");
  };

  shift::SynthParams synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic pool with planted clusters");
  s->add_option("--n", synth.n, "Number of instances")->required()->check(CLI::PositiveNumber);
  s->add_option("--dim", synth.dim, "Hidden dimension")->required()->check(CLI::PositiveNumber);
  s->add_option("--layers", synth.layers, "Dumped layers per anchor")->check(CLI::PositiveNumber);
  s->add_option("--clusters", synth.clusters, "Planted clusters")->check(CLI::PositiveNumber);
  s->add_option("--samples", synth.samples, "Synthetic rollouts per instance (0 = none)");
  s->add_option("--seed", synth.seed, "Random seed");
  add_output(s);

  std::string pool_path, rollouts_path, method = "qwff", variant = "s_plus_delta", score;
  std::size_t budget = 0;
  auto* sel = app.add_subcommand("select", "Select a budgeted subset from an anchor pool");
  sel->add_option("--pool", pool_path, "Pool manifest")->required()->check(CLI::ExistingFile);
  sel->add_option("--method", method, "qwff|farthest_first|topk_utility|kmeans_center|random");
  sel->add_option("--variant", variant, "Coverage feature: s|delta|s_plus_delta");
  sel->add_option("--budget", budget, "Subset size")->required();
  sel->add_option("--seed", common.seed, "Seed for random and kmeans_center");
  sel->add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  add_output(sel);

  auto* base = app.add_subcommand("baselines", "Rank-and-take selection on a rollout score");
  base->add_option("--rollouts", rollouts_path, "Rollout records (JSON Lines)")
      ->required()
      ->check(CLI::ExistingFile);
  base->add_option("--score", score, "sc_entropy|cot_similarity|q_ppl|a_ppl")->required();
  base->add_option("--budget", budget, "Subset size")->required();
  base->add_option("--seed", common.seed, "Recorded in run.json");
  add_output(base);

  bool gain_fixture = false;
  auto* an = app.add_subcommand("analyze", "Rank-correlation analyses and reports");
  an->add_flag("--gain-fixture", gain_fixture, "Include the built-in shift-rank vs. gain fixture");
  an->add_option("--pool", pool_path, "Pool manifest")->check(CLI::ExistingFile);
  an->add_option("--rollouts", rollouts_path, "Rollout records with token lengths")
      ->check(CLI::ExistingFile);
  an->add_option("--variant", variant, "Coverage feature: s|delta|s_plus_delta");
  an->add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  an->add_option("--seed", common.seed, "Recorded in run.json");
  add_output(an, false);

  std::string fixture;
  auto* gc = app.add_subcommand("grpo-check", "Evaluate GRPO objective terms on a JSON fixture");
  gc->add_option("--fixture,fixture", fixture, "Fixture JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) {
      return cmd_synth(synth, common);
    }
    if (sel->parsed()) {
      shift::SelectionConfig config;
      config.budget = budget;
      config.method = shift::parse_method(method);
      config.variant = shift::parse_variant(variant);
      config.seed = common.seed;
      config.threads = common.threads;
      return cmd_select(pool_path, config, common);
    }
    if (base->parsed()) return cmd_baselines(rollouts_path, score, budget, common);
    if (an->parsed()) {
      return cmd_analyze(gain_fixture, pool_path, rollouts_path, shift::parse_variant(variant), common);
    }
    if (gc->parsed()) return cmd_grpo_check(fixture);
  } catch (const shift::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
