#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "crowdloc/ctr.hpp"
#include "crowdloc/eval.hpp"
#include "crowdloc/error.hpp"
#include "json.hpp"

namespace crowdloc::cli {

namespace {

nlohmann::ordered_json matching_json(const Matching& m) {
  auto pairs = nlohmann::ordered_json::array();
  for (const auto& p : m.pairs) pairs.push_back({p.row, p.col});
  return {{"pairs", pairs}, {"cost", m.cost}};
}

}  // namespace

Runner add_match_demo(CLI::App& app, const GlobalOptions& g) {
  struct Opts {
    std::filesystem::path candidates;
    std::filesystem::path gts;
    std::string ctr = "on";
    double proxy_scale = 1.0;
  };
  auto o = std::make_shared<Opts>();
  app.add_option("--candidates", o->candidates, "Candidate CSV with x,y,p columns")
      ->required();
  app.add_option("--gts", o->gts, "Annotation file")->required();
  app.add_option("--ctr", o->ctr, "Add proxy distance terms to the loss")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app.add_option("--proxy-scale", o->proxy_scale, "Weight of the proxy distance terms")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();

  return [o, &g] {
    std::vector<Candidate> candidates;
    {
      std::ifstream in(o->candidates, std::ios::binary);
      if (!in) throw Error("cannot open " + o->candidates.string());
      try {
        candidates = read_candidates_csv(in);
      } catch (const ParseError& e) {
        throw Error(o->candidates.string() + ": " + e.what());
      }
    }
    const auto scene = load_scene(o->gts, g);
    const auto preds = predictions_of(candidates);
    const auto gts = scene.positions();

    const auto r = ctr_match(preds, gts);
    LocateLossOptions opt;
    opt.use_ctr = parse_on_off(o->ctr);
    opt.proxy_scale = o->proxy_scale;
    const auto loss = locate_loss(preds, gts, r, opt);

    std::string body;
    if (resolve_format(g, "json") == "json") {
      nlohmann::ordered_json j;
      j["omega1"] = matching_json(r.omega1);
      j["s1"] = r.s1;
      j["s2"] = r.s2;
      j["s_prime"] = r.s_prime;
      j["g_prime"] = r.g_prime;
      j["omega2"] = matching_json(r.omega2);
      j["losses"] = {{"cls", loss.cls}, {"dist", loss.dist}, {"total", loss.total}};
      body = j.dump(2) + "\n";
    } else {
      std::ostringstream csv;
      csv << "matching,candidate,gt\n";
      for (const auto& p : r.omega1.pairs) csv << "omega1," << p.row << ',' << p.col << '\n';
      for (const auto& p : r.omega2.pairs) csv << "omega2," << p.row << ',' << p.col << '\n';
      body = csv.str();
    }
    OutputSet outputs;
    outputs.add_primary(g.out, std::move(body));
    outputs.commit();
    print_ok("match-demo", {{"candidates", std::to_string(preds.size())},
                            {"gts", std::to_string(gts.size())},
                            {"s1", std::to_string(r.s1.size())},
                            {"s_prime", std::to_string(r.s_prime.size())},
                            {"iou", num(consistency_iou(r.s1, r.s2))},
                            {"total", num(loss.total)}});
  };
}

}  // namespace crowdloc::cli
