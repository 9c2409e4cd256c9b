#include <algorithm>
#include <sstream>

#include "commands.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/priors.hpp"
#include "crowdloc/synth.hpp"
#include "json.hpp"

namespace crowdloc::cli {

Runner add_simulate(CLI::App& app, const GlobalOptions& g) {
  struct Opts {
    std::string ctr = "on";
    int steps = 500;
    double lr = 0.1;
    double jitter = 2.0;
    bool learn_density = false;
    int t = 1;
    int window = 50;
    SceneConfig scene{64, 64, 1, 10, 20, 6.0, 5, 0};
    std::vector<int> levels{4, 8, 16};
    int cell = 16;
    std::filesystem::path pyramid;
    std::filesystem::path candidates_out;
    std::filesystem::path scene_out;
  };
  auto o = std::make_shared<Opts>();
  app.add_option("--ctr", o->ctr, "Consistency-aware target rearrangement")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app.add_option("--steps", o->steps, "Gradient steps")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--lr", o->lr, "Learning rate")->capture_default_str();
  app.add_option("--jitter", o->jitter, "Per-step annotation noise (pixels)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_flag("--learn-density", o->learn_density,
               "Learn the count grid with the cascade loss instead of using the truth");
  app.add_option("--t", o->t, "Cascade depth when learning density")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--window", o->window, "Trailing steps averaged for window_iou")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--width", o->scene.width, "Scene width")->capture_default_str();
  app.add_option("--height", o->scene.height, "Scene height")->capture_default_str();
  app.add_option("--clusters", o->scene.n_clusters, "Gaussian clusters")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--min-points", o->scene.min_points_per_cluster, "Points per cluster, lower")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--max-points", o->scene.max_points_per_cluster, "Points per cluster, upper")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--cluster-sigma", o->scene.cluster_sigma, "Cluster spread (pixels)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--background", o->scene.background_points, "Uniform background points")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  app.add_option("--levels", o->levels, "Anchors per pyramid level")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--cell", o->cell, "Grid cell size in pixels")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--pyramid", o->pyramid, "Use this pyramid file instead of learning one");
  app.add_option("--candidates-out", o->candidates_out, "CSV of the final decoded candidates");
  app.add_option("--scene-out", o->scene_out, "JSON annotations of the generated scene");

  return [o, &g] {
    if (o->scene.min_points_per_cluster > o->scene.max_points_per_cluster)
      throw UsageError("--min-points exceeds --max-points");
    if (!o->scene_out.empty() && o->scene_out.extension() != ".json")
      throw UsageError("--scene-out must be a .json path");

    auto sc = o->scene;
    sc.seed = g.seed;
    const auto scene = generate_scene(sc);
    const std::vector<Scene> scenes{scene};
    const auto pyramid = o->pyramid.empty()
                             ? learn_pyramid(scenes, o->levels, o->cell, o->cell, g.seed)
                             : AnchorPyramid::load(o->pyramid);

    TrainConfig cfg;
    cfg.use_ctr = parse_on_off(o->ctr);
    cfg.oracle_density = !o->learn_density;
    cfg.steps = o->steps;
    cfg.lr = o->lr;
    cfg.seed = g.seed;
    cfg.annotation_jitter = o->jitter;
    cfg.cascade.t = o->t;
    const auto result = train_toy(scene, pyramid, cfg);
    const auto& trace = result.trace;

    std::string body;
    if (resolve_format(g, "csv") == "csv") {
      std::ostringstream csv;
      write_trace_csv(csv, trace);
      body = csv.str();
    } else {
      auto rows = nlohmann::ordered_json::array();
      for (const auto& r : trace)
        rows.push_back({{"step", r.step}, {"locate_loss", r.locate_loss},
                        {"count_loss", r.count_loss}, {"iou", r.iou}, {"f1", r.f1}});
      body = rows.dump(2) + "\n";
    }

    OutputSet outputs;
    outputs.add_primary(g.out, std::move(body));
    if (!o->candidates_out.empty()) {
      std::ostringstream csv;
      write_candidates_csv(csv, result.final_candidates);
      outputs.add(o->candidates_out, csv.str());
    }
    if (!o->scene_out.empty())
      outputs.add(o->scene_out, format_annotations(scene, AnnotationFormat::kJson));
    outputs.commit();

    const auto window = std::min<std::size_t>(static_cast<std::size_t>(o->window), trace.size());
    double window_iou = 0.0;
    for (std::size_t i = trace.size() - window; i < trace.size(); ++i)
      window_iou += trace[i].iou / static_cast<double>(window);
    print_ok("simulate", {{"seed", std::to_string(g.seed)},
                          {"ctr", o->ctr},
                          {"steps", std::to_string(trace.size())},
                          {"points", std::to_string(scene.points().size())},
                          {"final_iou", num(trace.back().iou)},
                          {"window_iou", num(window_iou)},
                          {"final_f1", num(trace.back().f1)},
                          {"final_locate_loss", num(trace.back().locate_loss)}});
  };
}

}  // namespace crowdloc::cli
