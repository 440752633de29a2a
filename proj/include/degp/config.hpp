#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace degp::cli {

/// Flat key=value configuration with dotted keys. Keys are validated against
/// the registry of documented keys; unknown keys are rejected at set time so
/// typos fail loudly instead of silently using a default.
class Config {
 public:
  Config() = default;

  /// Parse "key = value" lines; '#' starts a comment.
  static Config from_file(const std::string& path);
  static Config from_text(const std::string& text, const std::string& origin);

  /// Named recipe. Unknown name -> invalid_argument listing the presets.
  static Config preset(const std::string& name);
  static std::vector<std::string> preset_names();
  static const std::vector<std::string>& known_keys();

  void set(const std::string& key, const std::string& value);
  /// Overlay another config onto this one (the other side wins).
  void merge(const Config& other);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  std::size_t get_size(const std::string& key, std::size_t def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<std::size_t> get_sizes(const std::string& key,
                                     const std::vector<std::size_t>& def) const;
  std::vector<std::uint64_t> get_u64s(const std::string& key,
                                      const std::vector<std::uint64_t>& def) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& def) const;

  /// Sorted "key = value" lines; reloadable through from_text/from_file.
  std::string serialize() const;
  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace degp::cli
