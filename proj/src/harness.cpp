#include "deplen/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

namespace deplen {

using nlohmann::json;

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

json ledger_payload(const LedgerEntry& e) {
  json assessments = json::array();
  for (const auto& a : e.assessments) assessments.push_back({a.delay, a.successes, a.trials_run, a.positive});
  return {{"type", std::string(to_string(e.arch.cell))},
          {"hidden", e.arch.hidden},
          {"layers", e.arch.layers},
          {"run", e.run},
          {"threshold", e.threshold},
          {"capped", e.capped},
          {"seed", e.seed},
          {"timestamp", e.timestamp},
          {"wall_seconds", e.wall_seconds},
          {"assessments", std::move(assessments)}};
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double stat_value(const Statistics& s, Statistic stat) {
  switch (stat) {
    case Statistic::kMin:
      return static_cast<double>(s.min);
    case Statistic::kMedian:
      return s.median;
    case Statistic::kMean:
      return s.mean;
    case Statistic::kMax:
      return static_cast<double>(s.max);
  }
  return 0.0;
}

}  // namespace

void SweepGrid::validate() const {
  if (cells.empty() || hidden.empty() || layers.empty()) throw std::invalid_argument("empty grid");
  if (runs_per_arch < 1) throw std::invalid_argument("runs_per_arch must be >= 1");
  for (const auto& arch : architectures()) arch.validate();
}

std::vector<Architecture> SweepGrid::architectures() const {
  std::vector<Architecture> out;
  for (CellType cell : cells) {
    for (int h : hidden) {
      for (int l : layers) out.push_back({cell, h, l});
    }
  }
  return out;
}

Statistics aggregate(std::span<const std::int64_t> values) {
  if (values.empty()) throw std::invalid_argument("aggregate needs at least one value");
  std::vector<std::int64_t> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();

  Statistics s;
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 == 1 ? static_cast<double>(sorted[n / 2])
                        : 0.5 * static_cast<double>(sorted[n / 2 - 1] + sorted[n / 2]);
  const double sum = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  s.mean = sum / static_cast<double>(n);
  if (n > 1) {
    double ss = 0.0;
    for (auto v : sorted) ss += (static_cast<double>(v) - s.mean) * (static_cast<double>(v) - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Ledger

std::string encode_ledger_line(const LedgerEntry& entry) {
  json payload = ledger_payload(entry);
  const std::string body = payload.dump();
  payload["checksum"] = hex64(fnv1a(body));
  return payload.dump();
}

LedgerEntry decode_ledger_line(std::string_view line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("not valid JSON (") + e.what() + ")");
  }
  if (!doc.is_object() || !doc.contains("checksum")) throw std::runtime_error("missing checksum");
  const std::string checksum = doc["checksum"].get<std::string>();
  doc.erase("checksum");
  if (hex64(fnv1a(doc.dump())) != checksum) throw std::runtime_error("checksum mismatch");
  try {
    LedgerEntry e;
    e.arch.cell = parse_cell_type(doc.at("type").get<std::string>());
    e.arch.hidden = doc.at("hidden").get<int>();
    e.arch.layers = doc.at("layers").get<int>();
    e.run = doc.at("run").get<int>();
    e.threshold = doc.at("threshold").get<std::int64_t>();
    e.capped = doc.at("capped").get<bool>();
    e.seed = doc.at("seed").get<std::uint64_t>();
    e.timestamp = doc.at("timestamp").get<std::string>();
    e.wall_seconds = doc.at("wall_seconds").get<double>();
    for (const auto& a : doc.at("assessments")) {
      e.assessments.push_back({a.at(0).get<std::int64_t>(), a.at(1).get<int>(), a.at(2).get<int>(), a.at(3).get<bool>()});
    }
    return e;
  } catch (const json::exception& ex) {
    throw std::runtime_error(std::string("malformed entry (") + ex.what() + ")");
  }
}

RunLedger::RunLedger() : mutex_(std::make_unique<std::mutex>()) {}

RunLedger::RunLedger(std::filesystem::path path) : path_(std::move(path)), mutex_(std::make_unique<std::mutex>()) {
  if (!std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_);
  if (!in) throw std::runtime_error("cannot read ledger " + path_->string());
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    LedgerEntry entry;
    try {
      entry = decode_ledger_line(line);
    } catch (const std::exception& e) {
      throw LedgerError(number, e.what());
    }
    const Key key = key_of(entry.arch, entry.run);
    if (index_.count(key) != 0) throw LedgerError(number, "duplicate entry for " + entry.arch.label() + " run " + std::to_string(entry.run));
    index_.emplace(key, entries_.size());
    entries_.push_back(std::move(entry));
  }
}

RunLedger::Key RunLedger::key_of(const Architecture& arch, int run) {
  return {static_cast<int>(arch.cell), arch.hidden, arch.layers, run};
}

bool RunLedger::contains(const Architecture& arch, int run) const {
  std::lock_guard lock(*mutex_);
  return index_.count(key_of(arch, run)) != 0;
}

std::optional<LedgerEntry> RunLedger::find(const Architecture& arch, int run) const {
  std::lock_guard lock(*mutex_);
  const auto it = index_.find(key_of(arch, run));
  if (it == index_.end()) return std::nullopt;
  return entries_[it->second];
}

void RunLedger::append(const LedgerEntry& entry) {
  std::lock_guard lock(*mutex_);
  const Key key = key_of(entry.arch, entry.run);
  if (index_.count(key) != 0) {
    throw std::logic_error("ledger already holds " + entry.arch.label() + " run " + std::to_string(entry.run));
  }
  if (path_) {
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot append to ledger " + path_->string());
    out << encode_ledger_line(entry) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write to ledger " + path_->string() + " failed");
  }
  index_.emplace(key, entries_.size());
  entries_.push_back(entry);
}

std::vector<LedgerEntry> RunLedger::entries() const {
  std::lock_guard lock(*mutex_);
  return entries_;
}

std::size_t RunLedger::size() const {
  std::lock_guard lock(*mutex_);
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Sweep

std::vector<SweepRow> run_sweep(const SweepGrid& grid, RunLedger& ledger, const ProbeFn& probe, int jobs,
                                const SweepProgress& progress) {
  grid.validate();
  struct Task {
    Architecture arch;
    int run;
  };
  std::vector<Task> tasks;
  for (const auto& arch : grid.architectures()) {
    for (int run = 0; run < grid.runs_per_arch; ++run) {
      if (!ledger.contains(arch, run)) tasks.push_back({arch, run});
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      try {
        const std::uint64_t seed = probe_seed(grid.master_seed, task.arch, task.run);
        const ProbeResult result = probe(task.arch, task.run, seed);
        LedgerEntry entry{task.arch, task.run, result.threshold, result.capped, seed,
                          utc_timestamp(), result.wall_seconds, result.assessments};
        ledger.append(entry);
        if (progress) progress(entry);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        failed = true;
      }
    }
  };

  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return collect_rows(grid, ledger);
}

std::vector<SweepRow> collect_rows(const SweepGrid& grid, const RunLedger& ledger) {
  std::vector<SweepRow> rows;
  for (const auto& arch : grid.architectures()) {
    SweepRow row;
    row.arch = arch;
    for (int run = 0; run < grid.runs_per_arch; ++run) {
      const auto entry = ledger.find(arch, run);
      if (!entry) break;
      row.runs.push_back(entry->threshold);
    }
    if (static_cast<int>(row.runs.size()) != grid.runs_per_arch) continue;
    row.stats = aggregate(row.runs);
    rows.push_back(std::move(row));
  }
  return rows;
}

ProbeFn training_probe(const ProbeConfig& config) {
  return [config](const Architecture& arch, int, std::uint64_t seed) {
    return probe_architecture(config, seed, training_trial_runner(arch, config.train));
  };
}

// ---------------------------------------------------------------------------
// Reports

std::string emit_csv(std::span<const SweepRow> rows) {
  std::size_t runs = 5;
  if (!rows.empty()) {
    runs = 0;
    for (const auto& row : rows) runs = std::max(runs, row.runs.size());
  }
  std::ostringstream out;
  out << "type,hidden,layers";
  for (std::size_t r = 1; r <= runs; ++r) out << ",r" << r;
  out << ",min,median,mean,max,std\n";
  for (const auto& row : rows) {
    if (row.runs.size() != runs) throw std::invalid_argument("rows disagree on the number of runs");
    out << to_string(row.arch.cell) << ',' << row.arch.hidden << ',' << row.arch.layers;
    for (auto v : row.runs) out << ',' << v;
    out << ',' << row.stats.min << ',' << fixed2(row.stats.median) << ',' << fixed2(row.stats.mean) << ','
        << row.stats.max << ',' << fixed2(row.stats.stddev) << '\n';
  }
  return out.str();
}

std::vector<SweepRow> parse_csv(std::string_view text) {
  std::vector<SweepRow> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  std::size_t runs = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    if (line_no == 1) {
      if (fields.size() < 9 || fields[0] != "type" || fields[1] != "hidden" || fields[2] != "layers" ||
          fields[fields.size() - 5] != "min" || fields.back() != "std") {
        throw std::invalid_argument("unrecognized CSV header");
      }
      runs = fields.size() - 8;
      continue;
    }
    if (fields.size() != runs + 8) {
      throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": expected " + std::to_string(runs + 8) + " fields");
    }
    try {
      SweepRow row;
      row.arch = {parse_cell_type(fields[0]), std::stoi(fields[1]), std::stoi(fields[2])};
      for (std::size_t r = 0; r < runs; ++r) row.runs.push_back(std::stoll(fields[3 + r]));
      const std::size_t s = 3 + runs;
      row.stats.min = std::stoll(fields[s]);
      row.stats.median = std::stod(fields[s + 1]);
      row.stats.mean = std::stod(fields[s + 2]);
      row.stats.max = std::stoll(fields[s + 3]);
      row.stats.stddev = std::stod(fields[s + 4]);
      rows.push_back(std::move(row));
    } catch (const std::logic_error& e) {
      throw std::invalid_argument("CSV line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

Statistic parse_statistic(std::string_view name) {
  if (name == "min") return Statistic::kMin;
  if (name == "median") return Statistic::kMedian;
  if (name == "mean") return Statistic::kMean;
  if (name == "max") return Statistic::kMax;
  throw std::invalid_argument("unknown statistic '" + std::string(name) + "'");
}

std::string_view to_string(Statistic stat) {
  switch (stat) {
    case Statistic::kMin:
      return "min";
    case Statistic::kMedian:
      return "median";
    case Statistic::kMean:
      return "mean";
    case Statistic::kMax:
      return "max";
  }
  return "?";
}

std::vector<PlotMatrix> emit_plot_data(std::span<const SweepRow> rows, Statistic stat) {
  std::vector<CellType> cells;
  for (const auto& row : rows) {
    if (std::find(cells.begin(), cells.end(), row.arch.cell) == cells.end()) cells.push_back(row.arch.cell);
  }
  std::vector<PlotMatrix> out;
  for (CellType cell : cells) {
    std::set<int> hidden, layers;
    std::map<std::pair<int, int>, const SweepRow*> by_pos;
    for (const auto& row : rows) {
      if (row.arch.cell != cell) continue;
      hidden.insert(row.arch.hidden);
      layers.insert(row.arch.layers);
      by_pos[{row.arch.hidden, row.arch.layers}] = &row;
    }
    PlotMatrix m{cell, {hidden.begin(), hidden.end()}, {layers.begin(), layers.end()}, {}, {}};
    std::ostringstream tsv;
    tsv << "# " << to_string(cell) << ' ' << to_string(stat) << '\n' << "hidden\\layers";
    for (int l : m.layers) tsv << '\t' << l;
    tsv << '\n';
    for (int h : m.hidden) {
      tsv << h;
      auto& line = m.values.emplace_back();
      for (int l : m.layers) {
        const auto it = by_pos.find({h, l});
        if (it == by_pos.end()) {
          throw std::invalid_argument("missing grid cell " + std::string(to_string(cell)) + " hidden=" +
                                      std::to_string(h) + " layers=" + std::to_string(l));
        }
        const double v = stat_value(it->second->stats, stat);
        line.push_back(v);
        tsv << '\t';
        if (stat == Statistic::kMin || stat == Statistic::kMax) {
          tsv << static_cast<std::int64_t>(v);
        } else {
          tsv << fixed2(v);
        }
      }
      tsv << '\n';
    }
    m.tsv = tsv.str();
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace deplen
