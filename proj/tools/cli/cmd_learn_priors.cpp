#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/priors.hpp"

namespace crowdloc::cli {

Runner add_learn_priors(CLI::App& app, const GlobalOptions& g) {
  struct Opts {
    std::vector<std::filesystem::path> annotations;
    std::vector<int> levels{1, 4, 8};
    int cell = 16;
  };
  auto o = std::make_shared<Opts>();
  app.add_option("annotations", o->annotations, "Annotation files (.json or .csv)")
      ->required();
  app.add_option("--levels", o->levels, "Anchors per level, e.g. 1,4,8")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--cell", o->cell, "Grid cell size in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  return [o, &g] {
    std::vector<Scene> scenes;
    std::size_t points = 0;
    for (const auto& p : o->annotations) {
      scenes.push_back(load_scene(p, g));
      points += scenes.back().points().size();
    }
    if (points == 0) throw ValidationError("annotation set contains no points");

    PriorLearnStats stats;
    const auto pyramid = learn_pyramid(scenes, o->levels, o->cell, o->cell, g.seed, &stats);

    std::string body;
    if (resolve_format(g, "json") == "json") {
      body = pyramid.to_json();
    } else {
      std::ostringstream csv;
      csv << "level,s,dx,dy\n";
      for (int i = 1; i <= pyramid.depth(); ++i)
        for (const auto& c : pyramid.level(i).centers)
          csv << i << ',' << pyramid.level(i).s << ',' << num(c.x) << ',' << num(c.y) << '\n';
      body = csv.str();
    }
    OutputSet outputs;
    outputs.add_primary(g.out, std::move(body));
    outputs.commit();

    std::string inertia;
    for (std::size_t i = 0; i < stats.inertia.size(); ++i) {
      std::cerr << "level " << i + 1 << " s=" << o->levels[i] << " inertia=" << num(stats.inertia[i])
                << (stats.used_fallback[i] ? " fallback=uniform" : "") << '\n';
      inertia += (i ? "," : "") + num(stats.inertia[i]);
    }
    print_ok("learn-priors", {{"files", std::to_string(scenes.size())},
                              {"points", std::to_string(points)},
                              {"levels", std::to_string(pyramid.depth())},
                              {"inertia", inertia}});
  };
}

}  // namespace crowdloc::cli
