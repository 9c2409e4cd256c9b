#include <charconv>
#include <fstream>
#include <sstream>

#include "commands.hpp"
#include "crowdloc/error.hpp"
#include "crowdloc/eval.hpp"
#include "json.hpp"

namespace crowdloc::cli {

namespace {

int parse_sigma_int(std::string_view s, const std::string& text) {
  int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size())
    throw UsageError("bad --sigma value '" + text + "'");
  return v;
}

// fixed:<sigma> | box | range:<lo>:<hi>
SigmaMode parse_sigma(const std::string& text) {
  if (text == "box") return BoxSigma{};
  if (text.starts_with("fixed:")) {
    const auto rest = text.substr(6);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), v);
    if (ec != std::errc() || end != rest.data() + rest.size() || !(v > 0.0))
      throw UsageError("bad --sigma value '" + text + "'");
    return FixedSigma{v};
  }
  if (text.starts_with("range:")) {
    const std::string_view rest = std::string_view(text).substr(6);
    const auto colon = rest.find(':');
    if (colon == std::string_view::npos) throw UsageError("bad --sigma value '" + text + "'");
    const SigmaRange r{parse_sigma_int(rest.substr(0, colon), text),
                       parse_sigma_int(rest.substr(colon + 1), text)};
    if (r.lo < 1 || r.hi < r.lo) throw UsageError("--sigma range needs 1 <= lo <= hi");
    return r;
  }
  throw UsageError("--sigma must be fixed:<s>, box or range:<lo>:<hi>");
}

std::vector<Point2> load_points(const std::filesystem::path& path, const GlobalOptions& g) {
  if (path.extension() == ".json") return load_scene(path, g).positions();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return read_points_csv(in);
  } catch (const ParseError& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string per_sigma_csv(const EvalResult& r) {
  std::ostringstream csv;
  csv << "sigma,tp,fp,fn,precision,recall,f1\n";
  for (const auto& row : r.per_sigma)
    csv << num(row.sigma) << ',' << row.tp << ',' << row.fp << ',' << row.fn << ','
        << num(row.precision) << ',' << num(row.recall) << ',' << num(row.f1) << '\n';
  return csv.str();
}

}  // namespace

Runner add_evaluate(CLI::App& app, const GlobalOptions& g) {
  struct Opts {
    std::vector<std::filesystem::path> preds;
    std::vector<std::filesystem::path> gts;
    std::string sigma = "fixed:8";
    bool macro = false;
    std::filesystem::path per_sigma;
  };
  auto o = std::make_shared<Opts>();
  app.add_option("--preds", o->preds, "Prediction CSV (x,y columns) per image")->required();
  app.add_option("--gts", o->gts, "Annotation file per image, same order")->required();
  app.add_option("--sigma", o->sigma, "fixed:<s> | box | range:<lo>:<hi>")
      ->capture_default_str();
  app.add_flag("--macro", o->macro, "Average P/R/F1 per image instead of pooling counts");
  app.add_option("--per-sigma", o->per_sigma, "CSV with one row per evaluated sigma");

  return [o, &g] {
    EvalConfig cfg;
    cfg.sigma = parse_sigma(o->sigma);
    cfg.aggregation = o->macro ? Aggregation::kMacro : Aggregation::kMicro;
    cfg.jobs = g.jobs;
    if (o->preds.size() != o->gts.size())
      throw ValidationError("got " + std::to_string(o->preds.size()) + " prediction files for " +
                            std::to_string(o->gts.size()) + " annotation files");

    std::vector<std::vector<Point2>> preds;
    std::vector<Scene> gts;
    for (std::size_t i = 0; i < o->preds.size(); ++i) {
      preds.push_back(load_points(o->preds[i], g));
      gts.push_back(load_scene(o->gts[i], g));
    }
    const auto r = evaluate(preds, gts, cfg);

    std::string body;
    if (resolve_format(g, "json") == "json") {
      nlohmann::ordered_json j;
      j["sigma"] = o->sigma;
      j["aggregation"] = o->macro ? "macro" : "micro";
      j["images"] = r.images;
      j["tp"] = r.tp;
      j["fp"] = r.fp;
      j["fn"] = r.fn;
      j["precision"] = r.precision;
      j["recall"] = r.recall;
      j["f1"] = r.f1;
      j["mae"] = r.mae;
      j["mse"] = r.mse;
      j["rmse"] = r.rmse;
      if (std::holds_alternative<SigmaRange>(cfg.sigma)) {
        auto rows = nlohmann::ordered_json::array();
        for (const auto& row : r.per_sigma)
          rows.push_back({{"sigma", row.sigma}, {"tp", row.tp}, {"fp", row.fp},
                          {"fn", row.fn}, {"precision", row.precision},
                          {"recall", row.recall}, {"f1", row.f1}});
        j["per_sigma"] = rows;
      }
      body = j.dump(2) + "\n";
    } else {
      std::ostringstream csv;
      csv << "images,tp,fp,fn,precision,recall,f1,mae,mse,rmse\n"
          << r.images << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << num(r.precision)
          << ',' << num(r.recall) << ',' << num(r.f1) << ',' << num(r.mae) << ','
          << num(r.mse) << ',' << num(r.rmse) << '\n';
      body = csv.str();
    }

    OutputSet outputs;
    outputs.add_primary(g.out, std::move(body));
    if (!o->per_sigma.empty()) outputs.add(o->per_sigma, per_sigma_csv(r));
    outputs.commit();
    print_ok("evaluate", {{"images", std::to_string(r.images)},
                          {"tp", std::to_string(r.tp)},
                          {"fp", std::to_string(r.fp)},
                          {"fn", std::to_string(r.fn)},
                          {"precision", num(r.precision)},
                          {"recall", num(r.recall)},
                          {"f1", num(r.f1)},
                          {"mae", num(r.mae)},
                          {"rmse", num(r.rmse)}});
  };
}

}  // namespace crowdloc::cli
