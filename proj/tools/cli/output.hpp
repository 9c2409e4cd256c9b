#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace crowdloc::cli {

// Bad flag combinations detected after parsing; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::filesystem::path out;  // empty: primary output goes to stdout
  std::string format;         // empty: the subcommand's default
  std::string image_size;     // WxH for CSV annotations without a sidecar
};

// Output files staged in memory and written only once the whole command has
// succeeded. Each file goes through a temporary and a rename; if any write
// fails, the files already written by this batch are removed.
class OutputSet {
 public:
  void add(std::filesystem::path path, std::string content);
  // Primary output: to `path` if set, otherwise printed on commit.
  void add_primary(const std::filesystem::path& path, std::string content);
  void commit();

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
  std::string stdout_text_;
};

// Shortest round-trip decimal form.
std::string num(double v);

// "json" or "csv", falling back to `fallback`.
std::string resolve_format(const GlobalOptions& g, const std::string& fallback);

// Summary line on stdout: `OK <subcommand> key=value ...`.
void print_ok(const std::string& subcommand,
              const std::vector<std::pair<std::string, std::string>>& fields);

}  // namespace crowdloc::cli
