#include "output.hpp"

#include <charconv>
#include <fstream>
#include <iostream>

#include "crowdloc/error.hpp"

namespace crowdloc::cli {

namespace fs = std::filesystem;

void OutputSet::add(fs::path path, std::string content) {
  files_.emplace_back(std::move(path), std::move(content));
}

void OutputSet::add_primary(const fs::path& path, std::string content) {
  if (path.empty())
    stdout_text_ += content;
  else
    add(path, std::move(content));
}

void OutputSet::commit() {
  std::vector<fs::path> written;
  try {
    for (const auto& [path, content] : files_) {
      auto tmp = path;
      tmp += ".partial";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + path.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) {
          out.close();
          fs::remove(tmp);
          throw Error("short write to " + path.string());
        }
      }
      fs::rename(tmp, path);
      written.push_back(path);
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
  std::cout << stdout_text_;
}

std::string num(double v) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) return "nan";
  return std::string(buf, end);
}

std::string resolve_format(const GlobalOptions& g, const std::string& fallback) {
  return g.format.empty() ? fallback : g.format;
}

void print_ok(const std::string& subcommand,
              const std::vector<std::pair<std::string, std::string>>& fields) {
  std::cout << "OK " << subcommand;
  for (const auto& [k, v] : fields) std::cout << ' ' << k << '=' << v;
  std::cout << '\n';
}

}  // namespace crowdloc::cli
