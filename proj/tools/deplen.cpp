// deplen: measure the longest delay a recurrent network learns to bridge.

#include "deplen/config.hpp"
#include "deplen/harness.hpp"
#include "deplen/probe.hpp"
#include "deplen/trainer.hpp"
#include "deplen/wavegen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace deplen;

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string ledger_path;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool ledger) {
  cmd->add_option("--seed", c.seed, "Master seed");
  cmd->add_option("--config", c.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  if (ledger) cmd->add_option("--ledger", c.ledger_path, "Append-only run ledger (JSON lines)");
  cmd->add_option("--jobs", c.jobs, "Concurrent training sessions")->check(CLI::PositiveNumber);
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig{} : load_config(c.config_path);
  if (c.seed) cfg.grid.master_seed = *c.seed;
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// Stand-in learner for dry runs: succeeds exactly when delay <= threshold.
TrialRunner oracle_runner(std::int64_t threshold) {
  return [threshold](std::int64_t delay, int, std::uint64_t) { return delay <= threshold; };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum learnable dependency length of recurrent networks"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Print example input/target waveform pairs");
  int gen_delay = 3, gen_duration = 5, gen_length = 100, gen_count = 4;
  std::uint64_t gen_seed = 0;
  bool gen_json = false;
  gen->add_option("--delay", gen_delay, "Delay l between the waves")->check(CLI::NonNegativeNumber);
  gen->add_option("--duration", gen_duration, "Wave duration d")->check(CLI::PositiveNumber);
  gen->add_option("--length", gen_length, "Base sequence length m")->check(CLI::PositiveNumber);
  gen->add_option("--count", gen_count, "Number of pairs")->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_flag("--json", gen_json, "Emit JSON lines {s, l, d, m, input, target}");

  // train
  auto* train = app.add_subcommand("train", "Run one training session and print its outcome as JSON");
  Common train_common;
  std::string train_type = "RNN";
  int train_hidden = 8, train_layers = 1, train_delay = 1;
  bool train_verbose = false;
  train->add_option("--type", train_type, "RNN, GRU or LSTM");
  train->add_option("--hidden", train_hidden, "Neurons per layer")->check(CLI::PositiveNumber);
  train->add_option("--layers", train_layers, "Layer count")->check(CLI::PositiveNumber);
  train->add_option("--delay", train_delay, "Delay l")->check(CLI::NonNegativeNumber);
  train->add_flag("--verbose,-v", train_verbose, "Log mean loss per epoch to stderr");
  add_common(train, train_common, false);

  // probe
  auto* probe = app.add_subcommand("probe", "Run one grow-terminate-search and print the result as JSON");
  Common probe_common;
  std::string probe_type = "RNN";
  int probe_hidden = 8, probe_layers = 1, probe_run = 0;
  std::optional<std::int64_t> probe_oracle;
  probe->add_option("--type", probe_type, "RNN, GRU or LSTM");
  probe->add_option("--hidden", probe_hidden, "Neurons per layer")->check(CLI::PositiveNumber);
  probe->add_option("--layers", probe_layers, "Layer count")->check(CLI::PositiveNumber);
  probe->add_option("--run", probe_run, "Run index (selects the derived seed)")->check(CLI::NonNegativeNumber);
  probe->add_option("--oracle-threshold", probe_oracle,
                    "Replace training with a learner that succeeds iff delay <= N (dry run)");
  add_common(probe, probe_common, false);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Probe every architecture of the grid, resuming from the ledger");
  Common sweep_common;
  std::string sweep_csv;
  std::optional<std::int64_t> sweep_oracle;
  sweep->add_option("--csv", sweep_csv, "Write the finished rows as CSV");
  sweep->add_option("--oracle-threshold", sweep_oracle,
                    "Replace training with a learner that succeeds iff delay <= N (dry run)");
  add_common(sweep, sweep_common, true);
  sweep->get_option("--ledger")->required();

  // report
  auto* report = app.add_subcommand("report", "Summarize a ledger as CSV and plot-ready matrices");
  Common report_common;
  std::string report_csv, plot_stat = "min", plot_dir;
  report->add_option("--csv", report_csv, "CSV output path (default: stdout)");
  report->add_option("--plot-stat", plot_stat, "Statistic for plot matrices")
      ->check(CLI::IsMember({"min", "median", "mean", "max"}));
  report->add_option("--plot-dir", plot_dir, "Directory for per-type TSV matrices");
  add_common(report, report_common, true);
  report->get_option("--ledger")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      const WaveformSpec spec = make_spec(gen_delay, gen_duration, gen_length);
      Rng rng(gen_seed);
      const Dataset data = make_dataset(spec, static_cast<std::size_t>(gen_count), rng);
      for (const auto& pair : data.pairs) {
        if (gen_json) {
          const nlohmann::json line = {{"s", pair.start}, {"l", spec.delay}, {"d", spec.duration}, {"m", spec.length},
                                       {"input", to_bitstring(pair.input)}, {"target", to_bitstring(pair.target)}};
          std::cout << line.dump() << '\n';
        } else {
          std::cout << to_bitstring(pair.input) << '\n' << to_bitstring(pair.target) << "\n\n";
        }
      }
    } else if (*train) {
      const RunConfig cfg = resolve(train_common);
      const Architecture arch{parse_cell_type(train_type), train_hidden, train_layers};
      EpochCallback log;
      if (train_verbose) {
        log = [](const EpochLog& e) {
          std::cerr << "epoch " << e.epoch << " mean_loss " << e.mean_loss << " batches " << e.batches_processed
                    << '\n';
        };
      }
      const auto outcome = train_session(arch, train_delay, cfg.probe.train, cfg.grid.master_seed, log);
      std::cout << to_json(outcome) << '\n';
    } else if (*probe) {
      RunConfig cfg = resolve(probe_common);
      cfg.probe.jobs = probe_common.jobs;
      const Architecture arch{parse_cell_type(probe_type), probe_hidden, probe_layers};
      arch.validate();
      const auto runner = probe_oracle ? oracle_runner(*probe_oracle) : training_trial_runner(arch, cfg.probe.train);
      const auto result = probe_architecture(cfg.probe, probe_seed(cfg.grid.master_seed, arch, probe_run), runner);
      std::cout << to_json(result, arch) << '\n';
    } else if (*sweep) {
      RunConfig cfg = resolve(sweep_common);
      RunLedger ledger(sweep_common.ledger_path);
      ProbeFn fn = training_probe(cfg.probe);
      if (sweep_oracle) {
        const auto runner = oracle_runner(*sweep_oracle);
        const ProbeConfig pc = cfg.probe;
        fn = [pc, runner](const Architecture&, int, std::uint64_t seed) { return probe_architecture(pc, seed, runner); };
      }
      const auto rows = run_sweep(cfg.grid, ledger, fn, sweep_common.jobs, [](const LedgerEntry& e) {
        std::cerr << e.arch.label() << " run " << e.run << " threshold " << e.threshold << '\n';
      });
      const std::string csv = emit_csv(rows);
      if (sweep_csv.empty()) {
        std::cout << csv;
      } else {
        write_file(sweep_csv, csv);
      }
    } else if (*report) {
      const RunConfig cfg = resolve(report_common);
      if (!std::filesystem::exists(report_common.ledger_path)) {
        throw std::runtime_error("ledger " + report_common.ledger_path + " does not exist");
      }
      const RunLedger ledger(report_common.ledger_path);
      const auto rows = collect_rows(cfg.grid, ledger);
      const std::string csv = emit_csv(rows);
      if (report_csv.empty()) {
        std::cout << csv;
      } else {
        write_file(report_csv, csv);
      }
      if (!plot_dir.empty()) {
        const Statistic stat = parse_statistic(plot_stat);
        for (const auto& m : emit_plot_data(rows, stat)) {
          write_file(std::filesystem::path(plot_dir) /
                         (std::string(to_string(m.cell)) + "_" + std::string(to_string(stat)) + ".tsv"),
                     m.tsv);
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "deplen: error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
