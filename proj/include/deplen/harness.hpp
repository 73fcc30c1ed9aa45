#pragma once

#include "deplen/probe.hpp"
#include "deplen/types.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace deplen {

struct SweepGrid {
  std::vector<CellType> cells{CellType::kRnn, CellType::kGru, CellType::kLstm};
  std::vector<int> hidden{8, 16, 24, 32, 40, 48, 56, 64, 72, 80, 88, 96, 104, 112, 120, 128};
  std::vector<int> layers{1, 2, 3, 4, 5, 6, 7, 8};
  int runs_per_arch = 5;
  std::uint64_t master_seed = 0;

  void validate() const;
  /// Type-major, then hidden size, then layer count, in axis order.
  std::vector<Architecture> architectures() const;
};

struct Statistics {
  std::int64_t min = 0;
  double median = 0.0;
  double mean = 0.0;
  std::int64_t max = 0;
  double stddev = 0.0;  // sample (n - 1) standard deviation
};

/// Min, median (mean of the two middle values for even counts), mean, max
/// and sample standard deviation of the per-run thresholds.
Statistics aggregate(std::span<const std::int64_t> values);

struct SweepRow {
  Architecture arch;
  std::vector<std::int64_t> runs;
  Statistics stats;
};

struct LedgerEntry {
  Architecture arch;
  int run = 0;
  std::int64_t threshold = 0;
  bool capped = false;
  std::uint64_t seed = 0;
  std::string timestamp;
  double wall_seconds = 0.0;
  std::vector<Assessment> assessments;
};

class LedgerError : public std::runtime_error {
 public:
  LedgerError(std::size_t line, const std::string& what)
      : std::runtime_error("ledger line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Append-only record of completed probe runs, one checksummed JSON object
/// per line. Appends are serialized and flushed line by line.
class RunLedger {
 public:
  /// In-memory ledger (nothing persisted).
  RunLedger();
  /// Loads and verifies `path` if it exists; appends go to the same file.
  /// Throws LedgerError naming the first corrupt or duplicate line.
  explicit RunLedger(std::filesystem::path path);

  bool contains(const Architecture& arch, int run) const;
  std::optional<LedgerEntry> find(const Architecture& arch, int run) const;
  /// Throws std::logic_error if the key is already present.
  void append(const LedgerEntry& entry);
  std::vector<LedgerEntry> entries() const;
  std::size_t size() const;

 private:
  using Key = std::tuple<int, int, int, int>;
  static Key key_of(const Architecture& arch, int run);

  std::optional<std::filesystem::path> path_;
  std::vector<LedgerEntry> entries_;
  std::map<Key, std::size_t> index_;
  std::unique_ptr<std::mutex> mutex_;
};

std::string encode_ledger_line(const LedgerEntry& entry);
/// Throws std::runtime_error on malformed JSON or checksum mismatch.
LedgerEntry decode_ledger_line(std::string_view line);

using ProbeFn = std::function<ProbeResult(const Architecture& arch, int run, std::uint64_t seed)>;
using SweepProgress = std::function<void(const LedgerEntry&)>;

/// Runs every (architecture, run) of the grid missing from the ledger, with
/// up to `jobs` probes in flight, and returns the rows assembled from the
/// ledger. Restarting with the same ledger only executes what is missing.
std::vector<SweepRow> run_sweep(const SweepGrid& grid, RunLedger& ledger, const ProbeFn& probe, int jobs = 1,
                                const SweepProgress& progress = {});

/// Rows for every grid architecture whose runs are all in the ledger.
std::vector<SweepRow> collect_rows(const SweepGrid& grid, const RunLedger& ledger);

/// ProbeFn backed by real training.
ProbeFn training_probe(const ProbeConfig& config);

std::string emit_csv(std::span<const SweepRow> rows);
/// Accepts any number of run columns between "layers" and "min".
std::vector<SweepRow> parse_csv(std::string_view text);

enum class Statistic { kMin, kMedian, kMean, kMax };
Statistic parse_statistic(std::string_view name);
std::string_view to_string(Statistic stat);

struct PlotMatrix {
  CellType cell;
  std::vector<int> hidden;
  std::vector<int> layers;
  std::vector<std::vector<double>> values;  // [hidden index][layer index]
  std::string tsv;
};

/// One hidden x layers surface per cell type, in order of first appearance.
/// Throws std::invalid_argument naming the first missing grid cell.
std::vector<PlotMatrix> emit_plot_data(std::span<const SweepRow> rows, Statistic stat);

}  // namespace deplen
