#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>

#include "CLI11.hpp"
#include "commands.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/scene.hpp"
#include "output.hpp"

namespace crowdloc::cli {

namespace {

std::optional<ImageSize> parse_image_size(const std::string& text) {
  if (text.empty()) return std::nullopt;
  ImageSize size;
  const auto x = text.find('x');
  if (x == std::string::npos) throw UsageError("--image-size must look like 640x480");
  const auto* first = text.data();
  const auto* mid = first + x;
  const auto* last = first + text.size();
  const auto a = std::from_chars(first, mid, size.width);
  const auto b = std::from_chars(mid + 1, last, size.height);
  if (a.ec != std::errc() || a.ptr != mid || b.ec != std::errc() || b.ptr != last ||
      size.width <= 0 || size.height <= 0)
    throw UsageError("--image-size must look like 640x480");
  return size;
}

}  // namespace

Scene load_scene(const std::filesystem::path& path, const GlobalOptions& g) {
  const auto size = parse_image_size(g.image_size);
  try {
    return load_annotations(path, format_from_extension(path), size);
  } catch (const NumericError&) {
    throw;
  } catch (const Error& e) {
    const std::string what = e.what();
    if (what.find(path.string()) != std::string::npos) throw;
    throw Error(path.string() + ": " + what);
  }
}

bool parse_on_off(const std::string& v) { return v == "on"; }

}  // namespace crowdloc::cli

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInternal = 3 };

}  // namespace

int main(int argc, char** argv) {
  using namespace crowdloc::cli;

  CLI::App app{"Anchor-pyramid crowd localization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--out", g.out, "Primary output file (default: stdout)");
  app.add_option("--format", g.format, "Output format")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--image-size", g.image_size, "WxH for CSV annotations without a sidecar");

  std::map<CLI::App*, Runner> runners;
  auto reg = [&](const char* name, const char* help, auto add) {
    auto* sub = app.add_subcommand(name, help);
    runners[sub] = add(*sub, g);
  };

  try {
    reg("learn-priors", "Learn anchor pyramid priors from annotations", add_learn_priors);
    reg("evaluate", "Score point predictions against annotations", add_evaluate);
    reg("match-demo", "Run the CTR assignment on one candidate set", add_match_demo);
    reg("simulate", "Train the toy predictor and write a trace", add_simulate);
    reg("grad-check", "Check count-loss gradients by finite differences", add_grad_check);
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }

  try {
    for (auto& [sub, run] : runners)
      if (sub->parsed()) run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const crowdloc::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kInternal;
  } catch (const crowdloc::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
