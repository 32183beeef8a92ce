// mwi: command-line front end for few-shot and continual imprinting runs.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mwi/csv.hpp"
#include "mwi/error.hpp"
#include "mwi/experiment.hpp"

namespace {

namespace fs = std::filesystem;
using namespace mwi;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

// Raw flag values; converted into an ExperimentConfig after parsing so that
// the library performs all validation.
struct RunFlags {
  std::string data;
  std::uint32_t synth_labels = 20;
  std::uint32_t synth_per_label = 20;
  std::uint32_t synth_dim = 512;
  double synth_sigma = 0.05;
  std::uint32_t synth_max_labels = 1;
  std::uint32_t synth_augmentations = 0;

  std::uint32_t ways = 5;
  std::uint32_t shots = 5;
  std::uint32_t test_per_class = 15;
  std::uint32_t episodes = kDefaultEpisodes;
  int epochs = kDefaultEpochs;
  double lr = 1e-3;
  std::string head = "sigmoid";
  double threshold = kDefaultThreshold;
  double grid_step = 0.01;
  std::uint32_t trivial_repeats = 0;
  std::string aug_mode = "all";
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out;
};

void add_dataset_flags(CLI::App* app, RunFlags& f) {
  app->add_option("--data", f.data, "Input .mwie file (otherwise synthetic data is generated)");
  app->add_option("--synth-labels", f.synth_labels, "Synthetic label count");
  app->add_option("--synth-per-label", f.synth_per_label, "Synthetic examples per label");
  app->add_option("--synth-dim", f.synth_dim, "Synthetic embedding width");
  app->add_option("--synth-sigma", f.synth_sigma, "Synthetic noise standard deviation");
  app->add_option("--synth-max-labels", f.synth_max_labels, "Synthetic labels per example (max)");
  app->add_option("--synth-augmentations", f.synth_augmentations,
                  "Synthetic augmented copies per example");
  app->add_option("--seed", f.seed, "Seed for data, episodes and training");
}

void add_run_flags(CLI::App* app, RunFlags& f) {
  add_dataset_flags(app, f);
  app->add_option("--ways", f.ways, "Labels per episode");
  app->add_option("--shots", f.shots, "Training groups per label");
  app->add_option("--test-per-class", f.test_per_class, "Test groups per label");
  app->add_option("--episodes", f.episodes, "Episode count");
  app->add_option("--epochs", f.epochs, "Training epochs (0 = imprint only)");
  app->add_option("--lr", f.lr, "Adam learning rate");
  app->add_option("--head", f.head, "sigmoid | softmax");
  app->add_option("--threshold", f.threshold, "Sigmoid decision threshold");
  app->add_option("--grid-step", f.grid_step, "Threshold grid spacing");
  app->add_option("--trivial-repeats", f.trivial_repeats, "Extra copies of each training row");
  app->add_option("--aug-mode", f.aug_mode, "all | unaugmented");
  app->add_option("--jobs", f.jobs, "Worker threads");
  app->add_option("--out", f.out, "Output directory");
}

SyntheticSpec synthetic_from(const RunFlags& f) {
  SyntheticSpec s;
  s.dim = f.synth_dim;
  s.num_labels = f.synth_labels;
  s.examples_per_label = f.synth_per_label;
  s.noise_sigma = f.synth_sigma;
  s.max_labels_per_example = f.synth_max_labels;
  s.augmentations_per_example = f.synth_augmentations;
  s.seed = f.seed;
  return s;
}

ExperimentConfig config_from(const RunFlags& f) {
  ExperimentConfig c;
  if (f.data.empty()) {
    c.synthetic = synthetic_from(f);
  } else {
    c.dataset_path = f.data;
  }
  c.episodes = {.n_way = f.ways, .n_shot = f.shots, .n_test = f.test_per_class,
                .n_episodes = f.episodes, .seed = f.seed};
  c.train.epochs = f.epochs;
  c.train.learning_rate = f.lr;
  c.train.seed = f.seed;
  c.head = parse_head(f.head);
  c.threshold = f.threshold;
  c.grid_step = f.grid_step;
  c.augmentation.mode = parse_augmentation_mode(f.aug_mode);
  c.augmentation.trivial_repeats = f.trivial_repeats;
  c.jobs = f.jobs;
  c.output_dir = f.out;
  c.check();
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError(FormatErrorCode::kIo, "cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatErrorCode::kIo, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

template <typename Fn>
std::string to_string_with(Fn&& fn) {
  std::ostringstream out;
  fn(out);
  return out.str();
}

void print_summary_table(const RunSummary& s) {
  std::printf("%-24s %10s %10s\n", "metric", "mean", "stderr");
  for (std::size_t m = 0; m < kMetricCount; ++m) {
    const auto& v = s.metrics[m];
    if (!v.mean) {
      std::printf("%-24s %10s %10s\n", std::string(kMetricNames[m]).c_str(), "NA", "NA");
    } else {
      std::printf("%-24s %10.4f %10.4f\n", std::string(kMetricNames[m]).c_str(), *v.mean,
                  v.stderr_);
    }
  }
  if (s.best_threshold.mean) {
    std::printf("%-24s %10.4f %10.4f\n", "best_threshold", *s.best_threshold.mean,
                s.best_threshold.stderr_);
    std::printf("%-24s %10.4f %10.4f\n", "best_f1", *s.best_f1.mean, s.best_f1.stderr_);
  }
  std::printf("episodes: %zu\n", s.episodes);
}

int cmd_synth(const RunFlags& f) {
  if (f.out.empty()) throw ConfigError("synth requires --out <file.mwie>");
  const fs::path out(f.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_dataset(generate_synthetic(synthetic_from(f)), out);
  return 0;
}

int cmd_fewshot(const RunFlags& f, const std::string& dump_batches) {
  const auto config = config_from(f);
  const auto dataset = resolve_dataset(config);
  const auto result = run_fewshot(dataset, config, !dump_batches.empty());
  if (!config.output_dir.empty()) write_fewshot_run(config, result);
  if (!dump_batches.empty()) {
    for (std::size_t i = 0; i < result.batches.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "episode_%04zu.json", i);
      write_text(fs::path(dump_batches) / name,
                 batch_to_json(result.batches[i], result.mode, config.threshold));
    }
  }
  std::printf("mode: %s\n", to_string(result.mode));
  print_summary_table(result.summary);
  return 0;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    if (!item.empty()) items.push_back(item);
  }
  if (items.empty()) throw ConfigError("empty axis list");
  return items;
}

struct AxisFlags {
  std::string epochs = "0,60";
  std::string aug_modes = "all";
  std::string repeats = "0";
  std::string heads = "sigmoid";
};

int cmd_ablate(const RunFlags& f, const AxisFlags& a) {
  const auto config = config_from(f);
  AblationAxes axes;
  axes.epochs.clear();
  for (const auto& s : split_list(a.epochs)) axes.epochs.push_back(std::stoi(s));
  axes.augmentation_modes.clear();
  for (const auto& s : split_list(a.aug_modes)) {
    axes.augmentation_modes.push_back(parse_augmentation_mode(s));
  }
  axes.trivial_repeats.clear();
  for (const auto& s : split_list(a.repeats)) {
    axes.trivial_repeats.push_back(static_cast<std::uint32_t>(std::stoul(s)));
  }
  axes.heads.clear();
  for (const auto& s : split_list(a.heads)) axes.heads.push_back(parse_head(s));

  const auto dataset = resolve_dataset(config);
  const auto cells = run_ablation_grid(dataset, config, axes);
  const auto csv = to_string_with([&](std::ostream& o) { write_ablation_csv(o, cells); });
  if (!config.output_dir.empty()) {
    write_text(config.output_dir / "config.json", config.to_json());
    write_text(config.output_dir / "ablation.csv", csv);
  }
  std::cout << csv;
  return 0;
}

int cmd_continual(const RunFlags& f, bool reimprint) {
  const auto config = config_from(f);
  const auto dataset = resolve_dataset(config);
  const auto result = run_continual_experiment(dataset, config, reimprint);
  if (!config.output_dir.empty()) write_continual_run(config, result);
  write_continual_summary_csv(std::cout, result);
  return 0;
}

int cmd_sweep(const RunFlags& f) {
  const auto config = config_from(f);
  const auto dataset = resolve_dataset(config);
  const auto sweep = run_threshold_sweep(dataset, config);
  const auto csv = to_string_with([&](std::ostream& o) { write_threshold_curve_csv(o, sweep); });
  if (!config.output_dir.empty()) {
    write_text(config.output_dir / "config.json", config.to_json());
    write_text(config.output_dir / "threshold_curve.csv", csv);
  }
  std::cout << csv;
  return 0;
}

// Long-form summary CSVs (metric,mean,stderr,n) are echoed after a parse
// check; everything else is treated as a per-row CSV and re-aggregated.
int cmd_metrics(const std::string& input, const std::string& aggregate) {
  if (input.empty() == aggregate.empty()) {
    throw ConfigError("metrics needs exactly one of --input or --aggregate");
  }
  if (!input.empty()) {
    const auto parsed = batch_from_json(read_text(input));
    const auto report = compute_all(parsed.batch, parsed.mode);
    write_report_csv(std::cout, report);
    std::cout << '\n';
    write_report_table(std::cout, report);
    return 0;
  }
  const auto text = read_text(aggregate);
  if (text.rfind("metric,mean,stderr,n", 0) == 0) {
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    std::cout << line << '\n';
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 4) throw DataError("malformed summary row: " + line);
      parse_csv_number(fields[1]);
      parse_csv_number(fields[2]);
      parse_csv_number(fields[3]);
      std::cout << line << '\n';
    }
    return 0;
  }
  std::istringstream in(text);
  const auto summary = summarize_episodes_csv(in);
  write_summary_csv(std::cout, summary);
  return 0;
}

int cmd_export_json(const std::string& input, const std::string& out) {
  const auto json = dataset_to_json(load_dataset(input), 2);
  if (out.empty()) {
    std::cout << json << '\n';
  } else {
    write_text(out, json + "\n");
  }
  return 0;
}

int cmd_validate(const std::string& input) {
  const auto dataset = load_dataset(input);
  const auto problems = validate(dataset);
  for (const auto& p : problems) std::cerr << input << ": " << p << '\n';
  if (!problems.empty()) return kExitData;
  std::printf("%s: ok (%zu records, dim %u, %zu labels)\n", input.c_str(),
              dataset.records.size(), dataset.dim, dataset.label_vocab.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilabel weight imprinting experiments"};
  app.require_subcommand(1);

  RunFlags synth_flags, fewshot_flags, ablate_flags, continual_flags, sweep_flags;

  auto* synth = app.add_subcommand("synth", "Write a synthetic .mwie dataset");
  add_dataset_flags(synth, synth_flags);
  synth->add_option("--out", synth_flags.out, "Output .mwie file")->required();

  std::string dump_batches;
  auto* fewshot = app.add_subcommand("fewshot", "Episodic few-shot evaluation");
  add_run_flags(fewshot, fewshot_flags);
  fewshot->add_option("--dump-batches", dump_batches,
                      "Directory for per-episode evaluation batches (JSON)");

  AxisFlags axes;
  auto* ablate = app.add_subcommand("ablate", "Cartesian ablation grid");
  add_run_flags(ablate, ablate_flags);
  ablate->add_option("--epochs-axis", axes.epochs, "Comma-separated epoch counts");
  ablate->add_option("--aug-modes", axes.aug_modes, "Comma-separated augmentation modes");
  ablate->add_option("--repeats-axis", axes.repeats, "Comma-separated trivial repeat counts");
  ablate->add_option("--heads", axes.heads, "Comma-separated heads");

  bool reimprint = false;
  auto* continual = app.add_subcommand("continual", "Continual learning with replay");
  add_run_flags(continual, continual_flags);
  continual->add_flag("--reimprint", reimprint, "Re-imprint every column at each step");

  auto* sweep = app.add_subcommand("sweep-threshold", "Mean F1 over the threshold grid");
  add_run_flags(sweep, sweep_flags);

  std::string metrics_input, metrics_aggregate;
  auto* metrics = app.add_subcommand("metrics", "Score a batch or re-aggregate a CSV");
  metrics->add_option("--input", metrics_input, "Evaluation batch JSON");
  metrics->add_option("--aggregate", metrics_aggregate, "CSV written by this tool");

  std::string export_input, export_out;
  auto* export_json = app.add_subcommand("export-json", "Debug JSON dump of a .mwie file");
  export_json->add_option("input", export_input, "Input .mwie file")->required();
  export_json->add_option("--out", export_out, "Output file (default stdout)");

  std::string validate_input;
  auto* validate_cmd = app.add_subcommand("validate", "Check a .mwie file");
  validate_cmd->add_option("input", validate_input, "Input .mwie file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(synth_flags);
    if (*fewshot) return cmd_fewshot(fewshot_flags, dump_batches);
    if (*ablate) return cmd_ablate(ablate_flags, axes);
    if (*continual) return cmd_continual(continual_flags, reimprint);
    if (*sweep) return cmd_sweep(sweep_flags);
    if (*metrics) return cmd_metrics(metrics_input, metrics_aggregate);
    if (*export_json) return cmd_export_json(export_input, export_out);
    if (*validate_cmd) return cmd_validate(validate_input);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::out_of_range& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
