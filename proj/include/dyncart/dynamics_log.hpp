#pragma once

// Training-dynamics logs: per-instance, per-epoch logits recorded under the
// full-input (ph) and hypothesis-only (h) settings, plus instance metadata.
//
// Wire format is JSONL, one object per line:
//   {"kind":"header","labels":[...],"epochs":{"ph":E1,"h":E2}}
//   {"kind":"instance","id":...,"premise":...,"hypothesis":...,"gold":...,
//    "reference_prediction":optional}
//   {"kind":"record","id":...,"setting":"ph"|"h","epoch":e,"logits":[...]}
// The header must precede every record. Line order is otherwise irrelevant.

#include <array>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dyncart {

enum class Setting { ph, h };

inline constexpr std::array<Setting, 2> kAllSettings{Setting::ph, Setting::h};

std::string_view to_string(Setting s);
std::optional<Setting> parse_setting(std::string_view s);

class LabelSpace {
 public:
  LabelSpace() = default;
  // Throws InputError unless there are at least two unique names.
  explicit LabelSpace(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::string& name(std::size_t index) const { return labels_.at(index); }
  const std::vector<std::string>& names() const { return labels_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  bool operator==(const LabelSpace&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct InstanceMeta {
  std::string id;
  std::string premise;
  std::string hypothesis;
  std::string gold;
  std::optional<std::string> reference_prediction;

  bool operator==(const InstanceMeta&) const = default;
};

using Logits = std::vector<double>;
// One entry per epoch; element 0 holds epoch 1.
using LogitSeries = std::vector<Logits>;

struct EpochLogits {
  std::string instance_id;
  Setting setting = Setting::ph;
  int epoch = 1;
  Logits logits;
};

// Immutable, validated log. Instances are kept sorted by id, so two logs
// built from the same lines in any order compare equal.
class DynamicsLog {
 public:
  // Checks every invariant and throws LogFormatError listing all violations.
  static DynamicsLog assemble(LabelSpace labels, std::map<Setting, int> epochs,
                              std::vector<InstanceMeta> instances,
                              std::vector<EpochLogits> records);

  const LabelSpace& labels() const { return labels_; }
  std::span<const InstanceMeta> instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }

  // Settings declared in the header, ph first.
  std::vector<Setting> settings() const;
  std::optional<int> epochs(Setting s) const;
  const std::map<Setting, int>& epochs_per_setting() const { return epochs_; }

  // Empty when the instance has no records under that setting.
  const LogitSeries& series(std::size_t instance, Setting s) const;
  std::size_t gold_index(std::size_t instance) const { return gold_.at(instance); }
  std::optional<std::size_t> find(std::string_view id) const;

  bool operator==(const DynamicsLog&) const = default;

 private:
  friend class LogAssembler;

  LabelSpace labels_;
  std::map<Setting, int> epochs_;
  std::vector<InstanceMeta> instances_;
  std::vector<std::size_t> gold_;
  std::vector<std::array<LogitSeries, 2>> series_;
};

DynamicsLog parse_log(std::istream& in);
DynamicsLog parse_log_file(const std::filesystem::path& path);

// Writes header, instances, then records ordered by instance, setting, epoch.
void write_log(std::ostream& out, const DynamicsLog& log);

// Single instance line in wire format (no trailing newline).
std::string instance_line(const InstanceMeta& meta);

// Numerically stable softmax (max subtraction). Throws InputError on
// non-finite input. Entries can underflow to exactly 0 for extreme gaps.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace dyncart
