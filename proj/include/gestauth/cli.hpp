#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace gestauth::cli {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct KeyInfo {
  const char* key;
  const char* default_value;
  const char* help;
};

/// Every recognised configuration key with its default.
const std::vector<KeyInfo>& config_keys();

/// Flat string map; typed getters throw InputError on malformed values.
class RunConfig {
 public:
  /// All keys at their defaults.
  RunConfig();

  void set(const std::string& key, const std::string& value);
  [[nodiscard]] const std::string& str(const std::string& key) const;
  [[nodiscard]] double real(const std::string& key) const;
  [[nodiscard]] std::size_t count(const std::string& key) const;
  [[nodiscard]] std::uint64_t u64(const std::string& key) const;
  [[nodiscard]] bool flag(const std::string& key) const;
  [[nodiscard]] std::vector<std::uint64_t> u64_list(const std::string& key) const;
  [[nodiscard]] const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// `key = value` lines; blank lines and `#` comments are skipped. Unknown
/// keys and malformed lines throw InputError.
void apply_config_text(RunConfig& cfg, const std::string& text);

using EnvLookup = std::function<const char*(const char*)>;

/// Overrides each key from GESTAUTH_<KEY> (upper case) when set.
void apply_env(RunConfig& cfg, const EnvLookup& getenv);

std::string config_to_json(const RunConfig& cfg, const std::string& command);

/// Entry point; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& getenv);
int run(int argc, const char* const* argv);

}  // namespace gestauth::cli
