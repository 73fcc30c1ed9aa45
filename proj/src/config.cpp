#include "deplen/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace deplen {

using nlohmann::json;

namespace {

void reject_unknown(const json& section, std::string_view name, std::initializer_list<std::string_view> known) {
  if (!section.is_object()) throw std::invalid_argument("config section '" + std::string(name) + "' must be an object");
  const std::set<std::string_view> allowed(known);
  for (const auto& [key, value] : section.items()) {
    if (allowed.count(key) == 0) {
      throw std::invalid_argument("unknown config key '" + std::string(name) + "." + key + "'");
    }
  }
}

template <typename T>
void read(const json& section, const char* key, T& out) {
  if (section.contains(key)) out = section.at(key).get<T>();
}

}  // namespace

RunConfig parse_config(std::string_view json_text) {
  RunConfig cfg;
  try {
    const json doc = json::parse(json_text);
    reject_unknown(doc, "<root>", {"grid", "probe", "train"});

    if (doc.contains("grid")) {
      const auto& g = doc["grid"];
      reject_unknown(g, "grid", {"cell_types", "hidden_sizes", "layer_counts", "runs_per_arch", "master_seed"});
      if (g.contains("cell_types")) {
        cfg.grid.cells.clear();
        for (const auto& name : g["cell_types"]) cfg.grid.cells.push_back(parse_cell_type(name.get<std::string>()));
      }
      read(g, "hidden_sizes", cfg.grid.hidden);
      read(g, "layer_counts", cfg.grid.layers);
      read(g, "runs_per_arch", cfg.grid.runs_per_arch);
      read(g, "master_seed", cfg.grid.master_seed);
    }
    if (doc.contains("probe")) {
      const auto& p = doc["probe"];
      reject_unknown(p, "probe", {"trials_per_length", "required_successes", "max_delay", "early_stop", "jobs"});
      read(p, "trials_per_length", cfg.probe.trials_per_length);
      read(p, "required_successes", cfg.probe.required_successes);
      read(p, "max_delay", cfg.probe.max_delay);
      read(p, "early_stop", cfg.probe.early_stop);
      read(p, "jobs", cfg.probe.jobs);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      reject_unknown(t, "train",
                     {"dataset_size", "batch_size", "max_epochs", "duration", "base_length", "ones_fraction",
                      "zeros_fraction", "head_width", "adam"});
      auto& tc = cfg.probe.train;
      read(t, "dataset_size", tc.dataset_size);
      read(t, "batch_size", tc.batch_size);
      read(t, "max_epochs", tc.max_epochs);
      read(t, "duration", tc.duration);
      read(t, "base_length", tc.base_length);
      read(t, "ones_fraction", tc.ones_fraction);
      read(t, "zeros_fraction", tc.zeros_fraction);
      read(t, "head_width", tc.head_width);
      if (t.contains("adam")) {
        const auto& a = t["adam"];
        reject_unknown(a, "train.adam", {"lr", "weight_decay", "beta1", "beta2", "eps"});
        read(a, "lr", tc.adam.lr);
        read(a, "weight_decay", tc.adam.weight_decay);
        read(a, "beta1", tc.adam.beta1);
        read(a, "beta2", tc.adam.beta2);
        read(a, "eps", tc.adam.eps);
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid config: ") + e.what());
  }
  cfg.grid.validate();
  cfg.probe.validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string config_to_json(const RunConfig& config) {
  json cells = json::array();
  for (CellType c : config.grid.cells) cells.push_back(std::string(to_string(c)));
  const auto& t = config.probe.train;
  const json doc = {
      {"grid",
       {{"cell_types", cells},
        {"hidden_sizes", config.grid.hidden},
        {"layer_counts", config.grid.layers},
        {"runs_per_arch", config.grid.runs_per_arch},
        {"master_seed", config.grid.master_seed}}},
      {"probe",
       {{"trials_per_length", config.probe.trials_per_length},
        {"required_successes", config.probe.required_successes},
        {"max_delay", config.probe.max_delay},
        {"early_stop", config.probe.early_stop},
        {"jobs", config.probe.jobs}}},
      {"train",
       {{"dataset_size", t.dataset_size},
        {"batch_size", t.batch_size},
        {"max_epochs", t.max_epochs},
        {"duration", t.duration},
        {"base_length", t.base_length},
        {"ones_fraction", t.ones_fraction},
        {"zeros_fraction", t.zeros_fraction},
        {"head_width", t.head_width},
        {"adam",
         {{"lr", t.adam.lr},
          {"weight_decay", t.adam.weight_decay},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"eps", t.adam.eps}}}}}};
  return doc.dump(2);
}

std::string to_json(const SessionOutcome& o) {
  const json doc = {{"success", o.success},
                    {"diverged", o.diverged},
                    {"epochs_run", o.epochs_run},
                    {"batches_processed", o.batches_processed},
                    {"updates_applied", o.updates_applied},
                    {"final_loss", o.final_loss},
                    {"seed", o.seed}};
  return doc.dump();
}

std::string to_json(const ProbeResult& r, const Architecture& arch) {
  json assessments = json::array();
  for (const auto& a : r.assessments) {
    assessments.push_back(
        {{"delay", a.delay}, {"successes", a.successes}, {"trials", a.trials_run}, {"positive", a.positive}});
  }
  const json doc = {{"type", std::string(to_string(arch.cell))},
                    {"hidden", arch.hidden},
                    {"layers", arch.layers},
                    {"threshold", r.threshold},
                    {"capped", r.capped},
                    {"seed", r.seed},
                    {"wall_seconds", r.wall_seconds},
                    {"assessments", assessments}};
  return doc.dump();
}

}  // namespace deplen
