#include "deplen/config.hpp"
#include "deplen/harness.hpp"

#include <gtest/gtest.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace deplen {
namespace {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<SweepRow> reference_rows() {
  return parse_csv(read_file(fs::path(DEPLEN_TEST_DATA_DIR) / "reference_sweep.csv"));
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("deplen_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

ProbeFn constant_probe(std::int64_t threshold, std::atomic<int>* calls = nullptr) {
  return [threshold, calls](const Architecture&, int, std::uint64_t seed) {
    if (calls) ++*calls;
    ProbeResult r;
    r.threshold = threshold;
    r.seed = seed;
    r.assessments.push_back({1, 4, 4, true});
    return r;
  };
}

// Threshold determined by the seed alone, so replays can be compared.
ProbeFn seeded_probe(std::atomic<int>* calls = nullptr) {
  return [calls](const Architecture&, int, std::uint64_t seed) {
    if (calls) ++*calls;
    ProbeConfig cfg;
    const TrialRunner runner = [](std::int64_t delay, int, std::uint64_t s) {
      Rng rng(s);
      return std::uniform_int_distribution<int>(0, 40)(rng) >= delay;
    };
    return probe_architecture(cfg, seed, runner);
  };
}

TEST(Aggregate, PublishedExamples) {
  const std::int64_t a[] = {7, 9, 9, 8, 7};
  const auto s = aggregate(a);
  EXPECT_EQ(s.min, 7);
  EXPECT_EQ(s.median, 8.0);
  EXPECT_DOUBLE_EQ(s.mean, 8.0);
  EXPECT_EQ(s.max, 9);
  EXPECT_NEAR(s.stddev, 1.0, 1e-12);

  const std::int64_t b[] = {11, 16, 11, 11, 12};
  const auto t = aggregate(b);
  EXPECT_EQ(t.min, 11);
  EXPECT_EQ(t.median, 11.0);
  EXPECT_NEAR(t.mean, 12.2, 1e-12);
  EXPECT_EQ(t.max, 16);
  EXPECT_NEAR(t.stddev, 2.16794833886788, 1e-12);

  const std::int64_t z[] = {0, 0, 0, 0, 0};
  const auto u = aggregate(z);
  EXPECT_EQ(u.max, 0);
  EXPECT_EQ(u.stddev, 0.0);
}

TEST(Aggregate, EvenCountMedianAndSingleValue) {
  const std::int64_t e[] = {4, 1, 3, 2};
  EXPECT_EQ(aggregate(e).median, 2.5);
  const std::int64_t one[] = {6};
  EXPECT_EQ(aggregate(one).stddev, 0.0);
  EXPECT_THROW(aggregate(std::span<const std::int64_t>{}), std::invalid_argument);
}

TEST(Aggregate, ReproducesEveryPublishedRow) {
  const auto rows = reference_rows();
  ASSERT_EQ(rows.size(), 384u);
  for (const auto& row : rows) {
    const auto s = aggregate(row.runs);
    EXPECT_EQ(s.min, row.stats.min) << row.arch.label();
    EXPECT_EQ(s.median, row.stats.median) << row.arch.label();
    EXPECT_EQ(s.max, row.stats.max) << row.arch.label();
    EXPECT_NEAR(s.mean, row.stats.mean, 0.005) << row.arch.label();
    EXPECT_NEAR(s.stddev, row.stats.stddev, 0.005) << row.arch.label();
  }
}

TEST(Csv, PublishedRowFormat) {
  SweepRow row{{CellType::kRnn, 8, 1}, {7, 9, 9, 8, 7}, {}};
  row.stats = aggregate(row.runs);
  EXPECT_EQ(emit_csv(std::span(&row, 1)),
            "type,hidden,layers,r1,r2,r3,r4,r5,min,median,mean,max,std\nRNN,8,1,7,9,9,8,7,7,8.00,8.00,9,1.00\n");
}

TEST(Csv, EmptyIsHeaderOnly) {
  EXPECT_EQ(emit_csv({}), "type,hidden,layers,r1,r2,r3,r4,r5,min,median,mean,max,std\n");
  EXPECT_TRUE(parse_csv(emit_csv({})).empty());
}

TEST(Csv, RoundTrip) {
  auto rows = reference_rows();
  for (auto& row : rows) row.stats = aggregate(row.runs);
  const std::string text = emit_csv(rows);
  const auto back = parse_csv(text);
  ASSERT_EQ(back.size(), rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].arch, rows[i].arch);
    EXPECT_EQ(back[i].runs, rows[i].runs);
    EXPECT_EQ(back[i].stats.min, rows[i].stats.min);
    EXPECT_NEAR(back[i].stats.mean, rows[i].stats.mean, 0.005);
  }
  EXPECT_EQ(emit_csv(back), text);
  EXPECT_THROW(parse_csv("a,b\n"), std::invalid_argument);
  EXPECT_THROW(parse_csv("type,hidden,layers,r1,min,median,mean,max,std\nRNN,8,1\n"), std::invalid_argument);
}

TEST(Grid, EmptyAxesRejected) {
  SweepGrid grid;
  grid.layers.clear();
  RunLedger ledger;
  EXPECT_THROW(
      {
        try {
          run_sweep(grid, ledger, constant_probe(1));
        } catch (const std::invalid_argument& e) {
          EXPECT_STREQ(e.what(), "empty grid");
          throw;
        }
      },
      std::invalid_argument);
}

TEST(Grid, OrderIsTypeMajor) {
  SweepGrid grid;
  const auto archs = grid.architectures();
  ASSERT_EQ(archs.size(), 384u);
  EXPECT_EQ(archs[0], (Architecture{CellType::kRnn, 8, 1}));
  EXPECT_EQ(archs[1], (Architecture{CellType::kRnn, 8, 2}));
  EXPECT_EQ(archs[8], (Architecture{CellType::kRnn, 16, 1}));
  EXPECT_EQ(archs[128], (Architecture{CellType::kGru, 8, 1}));
  EXPECT_EQ(archs.back(), (Architecture{CellType::kLstm, 128, 8}));
  // Same order as the published table.
  const auto rows = reference_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].arch, archs[i]);
}

TEST(Sweep, MockThresholdNine) {
  SweepGrid grid;
  grid.cells = {CellType::kRnn};
  grid.hidden = {8};
  grid.layers = {1};
  RunLedger ledger;
  std::atomic<int> calls{0};
  const auto rows = run_sweep(grid, ledger, constant_probe(9, &calls));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, (std::vector<std::int64_t>(5, 9)));
  EXPECT_EQ(rows[0].stats.stddev, 0.0);
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(emit_csv(rows).substr(emit_csv(rows).find('\n') + 1), "RNN,8,1,9,9,9,9,9,9,9.00,9.00,9,0.00\n");
}

TEST(Sweep, ResumeRunsOnlyMissingProbes) {
  TempDir dir;
  const fs::path path = dir.path() / "ledger.jsonl";
  SweepGrid grid;
  grid.cells = {CellType::kLstm};
  grid.hidden = {16};
  grid.layers = {2};
  {
    RunLedger ledger(path);
    for (int run = 0; run < 3; ++run) {
      const auto seed = probe_seed(grid.master_seed, {CellType::kLstm, 16, 2}, run);
      ledger.append({{CellType::kLstm, 16, 2}, run, 9, false, seed, "t", 0.0, {}});
    }
  }
  RunLedger reopened(path);
  EXPECT_EQ(reopened.size(), 3u);
  std::atomic<int> calls{0};
  const auto rows = run_sweep(grid, reopened, constant_probe(9, &calls));
  EXPECT_EQ(calls, 2);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(RunLedger(path).size(), 5u);
  calls = 0;
  RunLedger again(path);
  run_sweep(grid, again, constant_probe(9, &calls));
  EXPECT_EQ(calls, 0);
}

TEST(Sweep, InterruptedSweepReplaysToIdenticalCsv) {
  TempDir dir;
  SweepGrid grid;
  grid.cells = {CellType::kRnn, CellType::kGru};
  grid.hidden = {8, 16};
  grid.layers = {1, 2};
  grid.master_seed = 2024;

  RunLedger full(dir.path() / "full.jsonl");
  const std::string reference = emit_csv(run_sweep(grid, full, seeded_probe(), 2));

  // Keep a prefix of the ledger, as if the process died mid-sweep.
  const std::string text = read_file(dir.path() / "full.jsonl");
  std::istringstream lines(text);
  std::ofstream partial(dir.path() / "partial.jsonl", std::ios::binary);
  std::string line;
  for (int i = 0; i < 17 && std::getline(lines, line); ++i) partial << line << '\n';
  partial.close();

  RunLedger resumed(dir.path() / "partial.jsonl");
  std::atomic<int> calls{0};
  const std::string replay = emit_csv(run_sweep(grid, resumed, seeded_probe(&calls), 3));
  EXPECT_EQ(calls, 40 - 17);
  EXPECT_EQ(replay, reference);
}

TEST(Sweep, ProbeFailurePropagates) {
  SweepGrid grid;
  grid.cells = {CellType::kRnn};
  grid.hidden = {8};
  grid.layers = {1, 2};
  RunLedger ledger;
  const ProbeFn failing = [](const Architecture& a, int run, std::uint64_t) -> ProbeResult {
    if (a.layers == 2 && run == 1) throw std::runtime_error("trainer crashed");
    return ProbeResult{3, false, {}, 0, 0.0};
  };
  EXPECT_THROW(run_sweep(grid, ledger, failing), std::runtime_error);
  EXPECT_FALSE(ledger.contains({CellType::kRnn, 8, 2}, 1));
}

LedgerEntry sample_entry(int run = 0) {
  return {{CellType::kGru, 24, 3}, run, 17, false, 0xdeadbeefcafeULL + run, "2026-01-01T00:00:00Z", 12.5,
          {{1, 4, 4, true}, {2, 2, 4, false}}};
}

TEST(Ledger, LineRoundTrip) {
  const auto e = sample_entry();
  const auto d = decode_ledger_line(encode_ledger_line(e));
  EXPECT_EQ(d.arch, e.arch);
  EXPECT_EQ(d.run, e.run);
  EXPECT_EQ(d.threshold, e.threshold);
  EXPECT_EQ(d.seed, e.seed);
  EXPECT_EQ(d.timestamp, e.timestamp);
  EXPECT_EQ(d.wall_seconds, e.wall_seconds);
  EXPECT_EQ(d.assessments, e.assessments);
  EXPECT_EQ(encode_ledger_line(e).find('\n'), std::string::npos);
}

TEST(Ledger, TamperedLineIsRejected) {
  std::string line = encode_ledger_line(sample_entry());
  const auto pos = line.find("\"threshold\":17");
  ASSERT_NE(pos, std::string::npos);
  line.replace(pos, 14, "\"threshold\":18");
  EXPECT_THROW(decode_ledger_line(line), std::runtime_error);
  EXPECT_THROW(decode_ledger_line("{not json"), std::runtime_error);
}

TEST(Ledger, CorruptFileNamesOffendingLine) {
  TempDir dir;
  const fs::path path = dir.path() / "l.jsonl";
  {
    std::ofstream out(path);
    out << encode_ledger_line(sample_entry(0)) << '\n'
        << encode_ledger_line(sample_entry(1)) << '\n'
        << encode_ledger_line(sample_entry(2)).substr(0, 40) << '\n';
  }
  try {
    RunLedger ledger(path);
    FAIL() << "corrupt ledger accepted";
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Ledger, DuplicatesRejected) {
  TempDir dir;
  const fs::path path = dir.path() / "d.jsonl";
  {
    std::ofstream out(path);
    out << encode_ledger_line(sample_entry(0)) << '\n' << encode_ledger_line(sample_entry(0)) << '\n';
  }
  try {
    RunLedger ledger(path);
    FAIL() << "duplicate accepted";
  } catch (const LedgerError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  RunLedger mem;
  mem.append(sample_entry(0));
  EXPECT_THROW(mem.append(sample_entry(0)), std::logic_error);
  EXPECT_TRUE(mem.find({CellType::kGru, 24, 3}, 0).has_value());
  EXPECT_FALSE(mem.find({CellType::kGru, 24, 3}, 1).has_value());
}

TEST(Plot, MinimumSurfaceFromPublishedRows) {
  const auto rows = reference_rows();
  const auto mats = emit_plot_data(rows, Statistic::kMin);
  ASSERT_EQ(mats.size(), 3u);
  EXPECT_EQ(mats[0].cell, CellType::kRnn);
  ASSERT_EQ(mats[0].hidden.size(), 16u);
  ASSERT_EQ(mats[0].layers.size(), 8u);
  for (const auto& row : rows) {
    const auto& m = mats[static_cast<int>(row.arch.cell)];
    const auto hi = std::find(m.hidden.begin(), m.hidden.end(), row.arch.hidden) - m.hidden.begin();
    const auto li = std::find(m.layers.begin(), m.layers.end(), row.arch.layers) - m.layers.begin();
    EXPECT_EQ(m.values[hi][li], static_cast<double>(row.stats.min));
  }
  EXPECT_EQ(mats[0].tsv.substr(0, mats[0].tsv.find('\n')), "# RNN min");
  EXPECT_NE(mats[0].tsv.find("hidden\\layers\t1\t2\t3\t4\t5\t6\t7\t8\n8\t7\t"), std::string::npos);
}

TEST(Plot, MeanMatchesAggregateAndSingleCell) {
  SweepRow row{{CellType::kGru, 32, 4}, {3, 4, 4, 5, 9}, {}};
  row.stats = aggregate(row.runs);
  const auto mats = emit_plot_data(std::span(&row, 1), Statistic::kMean);
  ASSERT_EQ(mats.size(), 1u);
  EXPECT_EQ(mats[0].values, (std::vector<std::vector<double>>{{row.stats.mean}}));
  EXPECT_EQ(mats[0].tsv, "# GRU mean\nhidden\\layers\t4\n32\t5.00\n");
}

TEST(Plot, MissingCellIsNamed) {
  auto rows = reference_rows();
  rows.erase(rows.begin() + 130);  // GRU hidden 8 layers 3
  try {
    emit_plot_data(rows, Statistic::kMedian);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "missing grid cell GRU hidden=8 layers=3");
  }
  EXPECT_EQ(parse_statistic("max"), Statistic::kMax);
  EXPECT_THROW(parse_statistic("mode"), std::invalid_argument);
}

TEST(Config, DefaultsAndOverrides) {
  const RunConfig def = parse_config("{}");
  EXPECT_EQ(def.probe.train.adam.lr, 1e-5);
  EXPECT_EQ(def.grid.runs_per_arch, 5);
  const RunConfig cfg = parse_config(
      R"({"grid": {"cell_types": ["gru"], "hidden_sizes": [8, 16], "layer_counts": [1], "runs_per_arch": 3, "master_seed": 7},
          "probe": {"max_delay": 64, "jobs": 2},
          "train": {"max_epochs": 10, "adam": {"lr": 0.001}}})");
  EXPECT_EQ(cfg.grid.cells, (std::vector<CellType>{CellType::kGru}));
  EXPECT_EQ(cfg.grid.hidden, (std::vector<int>{8, 16}));
  EXPECT_EQ(cfg.grid.master_seed, 7u);
  EXPECT_EQ(cfg.probe.max_delay, 64);
  EXPECT_EQ(cfg.probe.train.max_epochs, 10);
  EXPECT_EQ(cfg.probe.train.adam.lr, 0.001);
  EXPECT_EQ(cfg.probe.train.adam.weight_decay, 1e-6);
  const RunConfig again = parse_config(config_to_json(cfg));
  EXPECT_EQ(config_to_json(again), config_to_json(cfg));
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config(R"({"train": {"epochs": 3}})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"probe": {"max_delay": 100}})"), std::invalid_argument);
  EXPECT_THROW(parse_config(R"({"grid": {"cell_types": ["CNN"]}})"), std::invalid_argument);
  EXPECT_THROW(parse_config("[1,2"), std::invalid_argument);
}

TEST(Config, JsonReports) {
  SessionOutcome o;
  o.success = true;
  o.batches_processed = 12;
  const auto j = nlohmann::json::parse(to_json(o));
  EXPECT_EQ(j.at("success"), true);
  EXPECT_EQ(j.at("batches_processed"), 12);
  ProbeResult r{13, false, {{1, 4, 4, true}}, 99, 1.5};
  const auto p = nlohmann::json::parse(to_json(r, {CellType::kLstm, 8, 2}));
  EXPECT_EQ(p.at("threshold"), 13);
  EXPECT_EQ(p.at("assessments").size(), 1u);
}

}  // namespace
}  // namespace deplen
