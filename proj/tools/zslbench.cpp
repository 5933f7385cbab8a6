// zslbench: run, report, audit and synth subcommands.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "zsl/harness.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kCellFailure = 1;
constexpr int kConfigError = 2;

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw zsl::ConfigError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw zsl::Error("cannot write " + path.string());
  out << text;
}

int cmd_run(const fs::path& config_path) {
  const zsl::BenchmarkConfig cfg = zsl::load_config(config_path);
  const zsl::RunOutput out = zsl::run_benchmark(cfg);
  fs::create_directories(cfg.output_dir);
  const fs::path results = cfg.output_dir / "results.json";
  write_file(results, zsl::records_to_json(out.records));
  for (const auto& f : out.failures) std::cerr << "cell failed: " << f.message << '\n';
  std::cout << out.records.size() << " records written to " << results.string() << '\n';
  return out.failures.empty() ? kOk : kCellFailure;
}

int cmd_report(const fs::path& input, const std::string& format, const std::string& out_path) {
  const auto fmt = zsl::parse_report_format(format);
  std::vector<zsl::ResultsRecord> records;
  try {
    records = zsl::records_from_json(slurp(input));
  } catch (const zsl::DataError& e) {
    throw zsl::ConfigError(e.what());
  }
  const std::string text = zsl::emit_report(records, fmt);
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_file(out_path, text);
  }
  return kOk;
}

int cmd_audit(const fs::path& split_path, const fs::path& names_path, const fs::path& pretrain_path) {
  zsl::SplitSpec split;
  std::vector<std::string> names, pretrain;
  try {
    split = zsl::load_split(split_path);
    names = zsl::read_class_list(names_path);
    pretrain = zsl::read_class_list(pretrain_path);
  } catch (const zsl::DataError& e) {
    throw zsl::ConfigError(e.what());
  }
  const auto violations = zsl::audit_overlap(split, names, pretrain);
  for (const auto& v : violations) {
    std::cout << (v.kind == zsl::SplitViolation::Kind::leakage ? "leakage: " : "overlap: ") << v.message << '\n';
  }
  std::cout << violations.size() << " violation(s)\n";
  return violations.empty() ? kOk : kCellFailure;
}

int cmd_synth(const fs::path& config_path, const fs::path& out_dir) {
  const zsl::SyntheticConfig cfg = zsl::parse_synthetic_config(slurp(config_path));
  const zsl::SyntheticData data = zsl::make_synthetic(cfg);
  zsl::save_dataset(data.bundle, out_dir);
  std::cout << "wrote " << data.bundle.num_images() << " images of " << data.bundle.num_classes() << " classes to "
            << out_dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot learning benchmark harness"};
  app.require_subcommand(1);

  std::string config, input, format = "table", out, split, names, pretrain, synth_config, synth_out;
  auto* run = app.add_subcommand("run", "Run a benchmark sweep");
  run->add_option("--config", config, "Benchmark config (JSON)")->required();
  auto* report = app.add_subcommand("report", "Render results");
  report->add_option("--input", input, "results.json")->required();
  report->add_option("--format", format, "table, ranks or raw")->check(CLI::IsMember({"table", "ranks", "raw"}));
  report->add_option("--out", out, "Write to a file instead of stdout");
  auto* audit = app.add_subcommand("audit", "Check a split for pretraining leakage and overlap");
  audit->add_option("--split", split, "splits.json")->required();
  audit->add_option("--names", names, "Class names, one per line, by class id")->required();
  audit->add_option("--pretrain", pretrain, "Pretraining class names, one per line")->required();
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--config", synth_config, "Synthetic config (JSON)")->required();
  synth->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*run) return cmd_run(config);
    if (*report) return cmd_report(input, format, out);
    if (*audit) return cmd_audit(split, names, pretrain);
    if (*synth) return cmd_synth(synth_config, synth_out);
  } catch (const zsl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCellFailure;
  }
  return kConfigError;
}
