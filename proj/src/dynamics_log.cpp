#include "dyncart/dynamics_log.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <json.hpp>

#include "dyncart/error.hpp"

namespace dyncart {

std::string format_diagnostic(const Diagnostic& d) {
  if (d.line == 0) return d.message;
  return "line " + std::to_string(d.line) + ": " + d.message;
}

namespace {

std::string join_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  std::string out;
  for (const auto& d : diagnostics) {
    if (!out.empty()) out += '\n';
    out += format_diagnostic(d);
  }
  return out.empty() ? "invalid dynamics log" : out;
}

}  // namespace

LogFormatError::LogFormatError(std::vector<Diagnostic> diagnostics)
    : InputError(join_diagnostics(diagnostics)),
      diagnostics_(std::move(diagnostics)) {}

std::string_view to_string(Setting s) {
  return s == Setting::ph ? "ph" : "h";
}

std::optional<Setting> parse_setting(std::string_view s) {
  if (s == "ph") return Setting::ph;
  if (s == "h") return Setting::h;
  return std::nullopt;
}

LabelSpace::LabelSpace(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.size() < 2) {
    throw InputError("label space needs at least 2 labels, got " +
                     std::to_string(labels_.size()));
  }
  std::set<std::string_view> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw InputError("duplicate label '" + l + "'");
  }
}

std::optional<std::size_t> LabelSpace::index_of(std::string_view name) const {
  auto it = std::find(labels_.begin(), labels_.end(), name);
  if (it == labels_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - labels_.begin());
}

std::vector<Setting> DynamicsLog::settings() const {
  std::vector<Setting> out;
  for (auto s : kAllSettings) {
    if (epochs_.contains(s)) out.push_back(s);
  }
  return out;
}

std::optional<int> DynamicsLog::epochs(Setting s) const {
  auto it = epochs_.find(s);
  if (it == epochs_.end()) return std::nullopt;
  return it->second;
}

const LogitSeries& DynamicsLog::series(std::size_t instance, Setting s) const {
  return series_.at(instance)[static_cast<std::size_t>(s)];
}

std::optional<std::size_t> DynamicsLog::find(std::string_view id) const {
  auto it = std::lower_bound(instances_.begin(), instances_.end(), id,
                             [](const InstanceMeta& m, std::string_view v) { return m.id < v; });
  if (it == instances_.end() || it->id != id) return std::nullopt;
  return static_cast<std::size_t>(it - instances_.begin());
}

// Cross-record validation shared by the parser and programmatic assembly.
class LogAssembler {
 public:
  struct LocatedInstance {
    InstanceMeta meta;
    std::size_t line = 0;
  };
  struct LocatedRecord {
    EpochLogits record;
    std::size_t line = 0;
  };

  static DynamicsLog run(LabelSpace labels, std::map<Setting, int> epochs,
                         std::vector<LocatedInstance> instances,
                         std::vector<LocatedRecord> records,
                         std::vector<Diagnostic> diagnostics) {
    auto fail = [&](std::size_t line, std::string msg) {
      diagnostics.push_back({line, std::move(msg)});
    };

    for (const auto& [setting, e] : epochs) {
      if (e < 1) {
        fail(0, "declared epoch count for setting " + std::string(to_string(setting)) +
                    " must be >= 1");
      }
    }

    std::stable_sort(instances.begin(), instances.end(),
                     [](const auto& a, const auto& b) {
                       return std::tie(a.meta.id, a.line) < std::tie(b.meta.id, b.line);
                     });

    DynamicsLog log;
    log.labels_ = std::move(labels);
    log.epochs_ = std::move(epochs);

    for (auto& inst : instances) {
      const auto& m = inst.meta;
      if (m.id.empty()) {
        fail(inst.line, "instance id must be non-empty");
        continue;
      }
      if (!log.instances_.empty() && log.instances_.back().id == m.id) {
        fail(inst.line, "duplicate instance id '" + m.id + "'");
        continue;
      }
      auto gold = log.labels_.index_of(m.gold);
      if (!gold) fail(inst.line, "unknown gold label '" + m.gold + "' for instance '" + m.id + "'");
      if (m.reference_prediction && !log.labels_.index_of(*m.reference_prediction)) {
        fail(inst.line, "unknown reference_prediction label '" + *m.reference_prediction +
                            "' for instance '" + m.id + "'");
      }
      log.gold_.push_back(gold.value_or(0));
      log.instances_.push_back(std::move(inst.meta));
    }
    log.series_.assign(log.instances_.size(), {});

    // (instance, setting) -> epoch -> line of the first record seen
    std::map<std::pair<std::size_t, Setting>, std::map<int, std::size_t>> seen;
    for (auto& rec : records) {
      auto& r = rec.record;
      auto idx = log.find(r.instance_id);
      if (!idx) {
        fail(rec.line, "record refers to unknown instance '" + r.instance_id + "'");
        continue;
      }
      auto declared = log.epochs(r.setting);
      if (!declared) {
        fail(rec.line, "setting '" + std::string(to_string(r.setting)) +
                           "' is not declared in the header");
        continue;
      }
      if (r.epoch < 1 || r.epoch > *declared) {
        fail(rec.line, "epoch " + std::to_string(r.epoch) + " outside declared range 1.." +
                           std::to_string(*declared));
        continue;
      }
      if (r.logits.size() != log.labels_.size()) {
        fail(rec.line, "logit arity mismatch: record has " + std::to_string(r.logits.size()) +
                           " logits but the label space has " +
                           std::to_string(log.labels_.size()) + " labels");
        seen[{*idx, r.setting}].emplace(r.epoch, rec.line);
        continue;
      }
      if (!std::all_of(r.logits.begin(), r.logits.end(), [](double v) { return std::isfinite(v); })) {
        fail(rec.line, "non-finite logit");
        seen[{*idx, r.setting}].emplace(r.epoch, rec.line);
        continue;
      }
      auto& epochs_seen = seen[{*idx, r.setting}];
      if (auto it = epochs_seen.find(r.epoch); it != epochs_seen.end()) {
        fail(std::max(rec.line, it->second),
             "duplicate record for instance '" + r.instance_id + "', setting " +
                 std::string(to_string(r.setting)) + ", epoch " + std::to_string(r.epoch));
        continue;
      }
      epochs_seen.emplace(r.epoch, rec.line);
      auto& series = log.series_[*idx][static_cast<std::size_t>(r.setting)];
      if (series.size() < static_cast<std::size_t>(*declared)) series.resize(*declared);
      series[r.epoch - 1] = std::move(r.logits);
    }

    for (const auto& [key, epochs_seen] : seen) {
      const int declared = *log.epochs(key.second);
      if (static_cast<int>(epochs_seen.size()) == declared) continue;
      std::string missing;
      for (int e = 1; e <= declared; ++e) {
        if (!epochs_seen.contains(e)) missing += (missing.empty() ? "" : ",") + std::to_string(e);
      }
      std::size_t first_line = 0;
      for (const auto& [e, line] : epochs_seen) {
        if (first_line == 0 || (line != 0 && line < first_line)) first_line = line;
      }
      fail(first_line, "missing epoch(s) " + missing + " for instance '" +
                           log.instances_[key.first].id + "', setting " +
                           std::string(to_string(key.second)));
    }

    if (!diagnostics.empty()) {
      std::stable_sort(diagnostics.begin(), diagnostics.end(),
                       [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
      throw LogFormatError(std::move(diagnostics));
    }
    return log;
  }
};

DynamicsLog DynamicsLog::assemble(LabelSpace labels, std::map<Setting, int> epochs,
                                  std::vector<InstanceMeta> instances,
                                  std::vector<EpochLogits> records) {
  std::vector<LogAssembler::LocatedInstance> li;
  li.reserve(instances.size());
  for (auto& m : instances) li.push_back({std::move(m), 0});
  std::vector<LogAssembler::LocatedRecord> lr;
  lr.reserve(records.size());
  for (auto& r : records) lr.push_back({std::move(r), 0});
  return LogAssembler::run(std::move(labels), std::move(epochs), std::move(li), std::move(lr), {});
}

namespace {

using nlohmann::json;

struct Header {
  LabelSpace labels;
  std::map<Setting, int> epochs;
};

bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

const json* field(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

std::optional<std::string> string_field(const json& obj, const char* key, std::size_t line,
                                        std::vector<Diagnostic>& diags) {
  const json* v = field(obj, key);
  if (!v || !v->is_string()) {
    diags.push_back({line, std::string("field '") + key + "' must be a string"});
    return std::nullopt;
  }
  return v->get<std::string>();
}

std::optional<Header> read_header(const json& obj, std::size_t line, std::vector<Diagnostic>& diags) {
  const json* labels = field(obj, "labels");
  if (!labels || !labels->is_array()) {
    diags.push_back({line, "header field 'labels' must be an array of strings"});
    return std::nullopt;
  }
  std::vector<std::string> names;
  for (const auto& l : *labels) {
    if (!l.is_string()) {
      diags.push_back({line, "header field 'labels' must be an array of strings"});
      return std::nullopt;
    }
    names.push_back(l.get<std::string>());
  }
  Header h;
  try {
    h.labels = LabelSpace(std::move(names));
  } catch (const InputError& e) {
    diags.push_back({line, e.what()});
    return std::nullopt;
  }
  const json* epochs = field(obj, "epochs");
  if (!epochs || !epochs->is_object() || epochs->empty()) {
    diags.push_back({line, "header field 'epochs' must be a non-empty object like {\"ph\":5,\"h\":5}"});
    return std::nullopt;
  }
  bool ok = true;
  for (auto it = epochs->begin(); it != epochs->end(); ++it) {
    auto s = parse_setting(it.key());
    if (!s) {
      diags.push_back({line, "unknown setting '" + it.key() + "' in header epochs"});
      ok = false;
      continue;
    }
    if (!it.value().is_number_integer() || it.value().get<long long>() < 1 ||
        it.value().get<long long>() > 1'000'000) {
      diags.push_back({line, "epoch count for setting '" + it.key() + "' must be a positive integer"});
      ok = false;
      continue;
    }
    h.epochs[*s] = it.value().get<int>();
  }
  if (!ok) return std::nullopt;
  return h;
}

std::optional<InstanceMeta> read_instance(const json& obj, std::size_t line,
                                          std::vector<Diagnostic>& diags) {
  const std::size_t before = diags.size();
  InstanceMeta m;
  auto id = string_field(obj, "id", line, diags);
  auto premise = string_field(obj, "premise", line, diags);
  auto hypothesis = string_field(obj, "hypothesis", line, diags);
  auto gold = string_field(obj, "gold", line, diags);
  if (const json* ref = field(obj, "reference_prediction"); ref && !ref->is_null()) {
    if (!ref->is_string()) {
      diags.push_back({line, "field 'reference_prediction' must be a string or null"});
    } else {
      m.reference_prediction = ref->get<std::string>();
    }
  }
  if (diags.size() != before) return std::nullopt;
  m.id = *id;
  m.premise = *premise;
  m.hypothesis = *hypothesis;
  m.gold = *gold;
  return m;
}

std::optional<EpochLogits> read_record(const json& obj, std::size_t line,
                                       std::vector<Diagnostic>& diags) {
  const std::size_t before = diags.size();
  EpochLogits r;
  auto id = string_field(obj, "id", line, diags);
  auto setting = string_field(obj, "setting", line, diags);
  if (setting && !parse_setting(*setting)) {
    diags.push_back({line, "unknown setting '" + *setting + "' (expected \"ph\" or \"h\")"});
  }
  const json* epoch = field(obj, "epoch");
  if (!epoch || !epoch->is_number_integer()) {
    diags.push_back({line, "field 'epoch' must be an integer"});
  } else if (epoch->get<long long>() < 1 || epoch->get<long long>() > 1'000'000) {
    diags.push_back({line, "field 'epoch' must be >= 1"});
  }
  const json* logits = field(obj, "logits");
  if (!logits || !logits->is_array()) {
    diags.push_back({line, "field 'logits' must be an array of numbers"});
  } else {
    for (const auto& v : *logits) {
      if (!v.is_number()) {
        diags.push_back({line, "field 'logits' must be an array of numbers"});
        break;
      }
      r.logits.push_back(v.get<double>());
    }
  }
  if (diags.size() != before) return std::nullopt;
  r.instance_id = *id;
  r.setting = *parse_setting(*setting);
  r.epoch = epoch->get<int>();
  return r;
}

}  // namespace

DynamicsLog parse_log(std::istream& in) {
  std::vector<Diagnostic> diags;
  std::optional<Header> header;
  std::size_t header_line = 0;
  std::vector<LogAssembler::LocatedInstance> instances;
  std::vector<LogAssembler::LocatedRecord> records;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;

    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      diags.push_back({lineno, std::string("malformed JSON: ") + e.what()});
      continue;
    } catch (const json::out_of_range& e) {
      diags.push_back({lineno, std::string("non-finite number: ") + e.what()});
      continue;
    }
    if (!obj.is_object()) {
      diags.push_back({lineno, "line is not a JSON object"});
      continue;
    }
    const json* kind = field(obj, "kind");
    if (!kind || !kind->is_string()) {
      diags.push_back({lineno, "missing string field 'kind'"});
      continue;
    }
    const auto k = kind->get<std::string>();
    if (k == "header") {
      if (header_line != 0) {
        diags.push_back({lineno, "duplicate header (first on line " + std::to_string(header_line) + ")"});
        continue;
      }
      header_line = lineno;
      header = read_header(obj, lineno, diags);
    } else if (k == "instance") {
      if (auto m = read_instance(obj, lineno, diags)) instances.push_back({std::move(*m), lineno});
    } else if (k == "record") {
      if (header_line == 0) {
        diags.push_back({lineno, "record precedes header"});
        continue;
      }
      if (auto r = read_record(obj, lineno, diags)) records.push_back({std::move(*r), lineno});
    } else {
      diags.push_back({lineno, "unknown kind '" + k + "'"});
    }
  }

  if (header_line == 0) {
    diags.push_back({0, "missing header"});
  }
  if (!header) {
    std::stable_sort(diags.begin(), diags.end(),
                     [](const Diagnostic& a, const Diagnostic& b) { return a.line < b.line; });
    throw LogFormatError(std::move(diags));
  }
  return LogAssembler::run(std::move(header->labels), std::move(header->epochs),
                           std::move(instances), std::move(records), std::move(diags));
}

DynamicsLog parse_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open dynamics log '" + path.string() + "'");
  return parse_log(in);
}

namespace {

nlohmann::ordered_json instance_json(const InstanceMeta& m) {
  nlohmann::ordered_json j;
  j["kind"] = "instance";
  j["id"] = m.id;
  j["premise"] = m.premise;
  j["hypothesis"] = m.hypothesis;
  j["gold"] = m.gold;
  if (m.reference_prediction) j["reference_prediction"] = *m.reference_prediction;
  return j;
}

}  // namespace

std::string instance_line(const InstanceMeta& meta) { return instance_json(meta).dump(); }

void write_log(std::ostream& out, const DynamicsLog& log) {
  nlohmann::ordered_json header;
  header["kind"] = "header";
  header["labels"] = log.labels().names();
  nlohmann::ordered_json epochs = nlohmann::ordered_json::object();
  for (auto s : log.settings()) epochs[std::string(to_string(s))] = *log.epochs(s);
  header["epochs"] = epochs;
  out << header.dump() << '\n';

  for (const auto& m : log.instances()) out << instance_line(m) << '\n';

  for (std::size_t i = 0; i < log.size(); ++i) {
    for (auto s : log.settings()) {
      const auto& series = log.series(i, s);
      for (std::size_t e = 0; e < series.size(); ++e) {
        nlohmann::ordered_json r;
        r["kind"] = "record";
        r["id"] = log.instances()[i].id;
        r["setting"] = to_string(s);
        r["epoch"] = e + 1;
        r["logits"] = series[e];
        out << r.dump() << '\n';
      }
    }
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw InputError("softmax of an empty vector");
  for (double v : logits) {
    if (!std::isfinite(v)) throw InputError("softmax input is not finite");
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace dyncart
