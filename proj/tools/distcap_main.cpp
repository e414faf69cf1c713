// Command-line driver: dataset generation, training runs, the ablation
// suite, and report merging. Exit codes: 0 success, 1 user error, 2 internal.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "distcap/config.hpp"
#include "distcap/retriever.hpp"
#include "distcap/trainer.hpp"
#include "distcap/world.hpp"

namespace fs = std::filesystem;
using namespace distcap;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset;
  long long seed = -1;
  std::string out = "out";
  bool print_config = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "config file (key = value lines)");
  cmd->add_option("--preset", args.preset, "named preset: desk or paper");
  cmd->add_option("--seed", args.seed, "override the config seed");
  cmd->add_option("--out", args.out, "output directory")->capture_default_str();
  cmd->add_flag("--print-config", args.print_config,
                "print the resolved config and exit");
}

// Precedence: defaults, then --preset, then --config keys, then --seed.
ExperimentConfig resolve_config(const CommonArgs& args) {
  ExperimentConfig config;
  if (!args.preset.empty()) apply_preset(config, args.preset);
  if (!args.config_path.empty()) apply_config_file(config, args.config_path);
  if (args.seed >= 0) config.seed = static_cast<uint64_t>(args.seed);
  return config;
}

SalienceProfile salience_profile(const ExperimentConfig& config) {
  SalienceProfile profile{};
  profile.fill(config.salience);
  profile[Schema::kObject] = 1.0;
  profile[Schema::kColor] = 1.0;
  return profile;
}

struct LoadedData {
  WorldDataset world;
  RetrieverParams retriever;
};

LoadedData load_dataset(const ExperimentConfig& config) {
  fs::path dir(config.data_dir);
  fs::path world_path = dir / "world.txt";
  fs::path retriever_path = dir / "retriever.txt";
  if (!fs::exists(world_path) || !fs::exists(retriever_path))
    throw UserError("no dataset under '" + config.data_dir +
                    "': run the generate command first");
  LoadedData data;
  data.world = load_world(world_path.string());
  data.retriever = load_retriever(retriever_path.string());
  if (data.retriever.dim() != config.retriever_dim)
    throw UserError("dataset retriever dimension " + std::to_string(data.retriever.dim()) +
                    " does not match config retriever_dim " +
                    std::to_string(config.retriever_dim));
  if (data.world.n_scenes() != config.n_scenes ||
      data.world.n_scenes() - data.world.n_train != config.n_test)
    throw UserError("dataset split does not match config: regenerate or adjust "
                    "n_scenes/n_test");
  fs::path cache = dir / "images.txt";
  if (fs::exists(cache)) load_embeddings(data.world, cache.string());
  else embed_world(data.world, data.retriever);
  return data;
}

int cmd_generate(const ExperimentConfig& config) {
  validate_config(config);
  fs::create_directories(config.data_dir);
  WorldDataset world =
      generate_world(config.seed, config.n_scenes, salience_profile(config), config.n_test);
  RetrieverParams retriever =
      build_retriever(config.seed, config.retriever_dim, config.retriever_noise);
  embed_world(world, retriever);
  world.neighbor_lists = mine_similar_images(world, config.mined_m);

  fs::path dir(config.data_dir);
  save_world(world, (dir / "world.txt").string());
  save_retriever(retriever, (dir / "retriever.txt").string());
  save_embeddings(world, (dir / "images.txt").string());
  std::ofstream cfg(dir / "config.txt");
  if (!cfg) throw UserError("cannot write config copy in " + config.data_dir);
  cfg << serialize_config(config);

  std::printf("wrote %d scenes (%d train, %d test) to %s\n", world.n_scenes(), world.n_train,
              world.n_scenes() - world.n_train, config.data_dir.c_str());
  std::printf("retriever hash %016llx, %d neighbors mined per scene\n",
              static_cast<unsigned long long>(retriever_hash(retriever)), config.mined_m);
  return 0;
}

void print_metrics(const EvalMetrics& metrics) {
  const auto& names = EvalMetrics::names();
  auto values = metrics.values();
  for (size_t i = 0; i < names.size(); ++i)
    std::printf("  %-12s %.4f\n", names[i], values[i]);
}

std::string valid_objectives() {
  std::string names;
  for (Objective objective : kAllObjectives) {
    if (!names.empty()) names += ", ";
    names += objective_name(objective);
  }
  return names;
}

int cmd_train(const ExperimentConfig& config, const std::string& objective_flag,
              const std::string& out) {
  if (objective_flag.empty())
    throw UserError("missing --objective (valid: " + valid_objectives() + ")");
  Objective objective = objective_from_string(objective_flag);
  validate_config(config);
  LoadedData data = load_dataset(config);

  fs::path out_dir = fs::path(out) / objective_name(objective);
  ExperimentResult result =
      run_experiment(config, objective, data.world, data.retriever, out_dir.string());

  std::printf("objective %s: %zu evaluations, final metrics:\n", objective_name(objective),
              result.per_epoch.size());
  print_metrics(result.final_metrics);
  std::printf("results in %s\n", out_dir.string().c_str());
  return 0;
}

int cmd_ablation(const ExperimentConfig& config, const std::string& out) {
  validate_config(config);
  LoadedData data = load_dataset(config);

  std::vector<ExperimentResult> suite =
      run_ablation_suite(config, data.world, data.retriever, out);
  write_ablation_csv(suite, out + "/ablation.csv");

  std::ostringstream report;
  report << format_ablation_table(suite) << '\n';
  for (const OrderingCheck& check : ordering_checks(suite))
    report << (check.passed ? "PASS" : "FAIL") << "  " << check.description << '\n';
  std::ofstream table_out(out + "/ablation.txt");
  if (!table_out) throw UserError("cannot write ablation table in " + out);
  table_out << report.str();
  std::cout << report.str();

  int failed = 0;
  for (const ExperimentResult& row : suite)
    if (row.failed) {
      ++failed;
      std::fprintf(stderr, "objective %s failed: %s\n", objective_name(row.objective),
                   row.error.c_str());
    }
  return failed ? 2 : 0;
}

int cmd_report(const std::string& results_dir, std::string out_file) {
  if (!fs::is_directory(results_dir))
    throw UserError("results directory does not exist: " + results_dir);
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(results_dir))
    if (entry.is_regular_file() && entry.path().filename() == "results.csv")
      files.push_back(entry.path());
  if (files.empty())
    throw UserError("no results.csv files under " + results_dir);
  std::sort(files.begin(), files.end());

  if (out_file.empty()) out_file = (fs::path(results_dir) / "report.csv").string();
  std::ofstream out(out_file);
  if (!out) throw UserError("cannot write report: " + out_file);
  out << "run,epoch,metric,value\n";
  long rows = 0;
  for (const fs::path& file : files) {
    std::string run = fs::relative(file.parent_path(), results_dir).generic_string();
    if (run == ".") run = file.parent_path().filename().generic_string();
    std::ifstream in(file);
    if (!in) throw UserError("cannot read " + file.string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line == "epoch,metric,value") continue;
      out << run << ',' << line << '\n';
      ++rows;
    }
  }
  std::printf("merged %ld rows from %zu runs into %s\n", rows, files.size(), out_file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"desk-scale distinctive captioning laboratory"};
  app.require_subcommand(1);
  app.footer("Worker threads are capped by the DISTCAP_THREADS environment variable.");

  CommonArgs generate_args, train_args, ablation_args;
  std::string objective_flag;
  std::string report_dir = "out";
  std::string report_out;

  CLI::App* generate = app.add_subcommand(
      "generate", "write the synthetic world, retriever, and embedding cache");
  add_common(generate, generate_args);

  CLI::App* train = app.add_subcommand("train", "run one training objective");
  add_common(train, train_args);
  train->add_option("--objective", objective_flag,
                    "tf, wtf, rl, wtf_rl, rl_unidirectional, scst_discriminator, "
                    "rl_no_regularizer");

  CLI::App* ablation =
      app.add_subcommand("ablation", "run all seven objectives from one pretrained snapshot");
  add_common(ablation, ablation_args);

  CLI::App* report = app.add_subcommand("report", "merge per-run results.csv files");
  report->add_option("--dir", report_dir, "directory scanned recursively for results.csv")
      ->capture_default_str();
  report->add_option("--out", report_out, "merged CSV path (default: <dir>/report.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (generate->parsed()) {
      ExperimentConfig config = resolve_config(generate_args);
      if (generate_args.print_config) {
        std::cout << serialize_config(config);
        return 0;
      }
      return cmd_generate(config);
    }
    if (train->parsed()) {
      ExperimentConfig config = resolve_config(train_args);
      if (train_args.print_config) {
        std::cout << serialize_config(config);
        return 0;
      }
      return cmd_train(config, objective_flag, train_args.out);
    }
    if (ablation->parsed()) {
      ExperimentConfig config = resolve_config(ablation_args);
      if (ablation_args.print_config) {
        std::cout << serialize_config(config);
        return 0;
      }
      return cmd_ablation(config, ablation_args.out);
    }
    if (report->parsed()) return cmd_report(report_dir, report_out);
  } catch (const UserError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    std::fprintf(stderr, "usage: distcap [generate|train|ablation|report] [options]; "
                         "see 'distcap --help'\n");
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 0;
}
