// uvsel command line: gen, run, score, bench.
//
// Exit codes: 0 success, 1 other failure (including a safety violation),
// 2 target not found, 3 validation failure, 4 detector backend transport failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "uvsel/bundle.hpp"
#include "uvsel/evaluation.hpp"
#include "uvsel/fixture_backend.hpp"
#include "uvsel/pipeline.hpp"
#include "uvsel/remote_backend.hpp"
#include "uvsel/synthscene.hpp"

namespace fs = std::filesystem;
using namespace uvsel;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitTargetNotFound = 2;
constexpr int kExitValidation = 3;
constexpr int kExitTransport = 4;

struct GenArgs {
  std::string spec;
  bool standard_suite = false;
  std::uint64_t seed = 0;
  std::string out;
};

struct RunArgs {
  std::string scene, config, backend, endpoint, out;
};

struct ScoreArgs {
  std::string run, scene;
};

struct BenchArgs {
  std::string suite, config;
};

PipelineConfig config_or_default(const std::string& path) {
  return path.empty() ? PipelineConfig{} : load_config(path);
}

int cmd_gen(const GenArgs& a) {
  if (a.spec.empty() == !a.standard_suite) {
    throw ConfigError("gen: give exactly one of --spec or --standard-suite");
  }
  if (a.standard_suite) {
    for (const auto& e : synth::standard_suite_specs(a.seed)) {
      const auto dir = fs::path(a.out) / e.name;
      save_bundle(synth::render(e.spec, e.seed), dir);
      std::cout << dir.string() << "\n";
    }
    return 0;
  }
  std::ifstream in(a.spec);
  if (!in) throw IoError("cannot read spec file " + a.spec);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("spec file: ") + e.what());
  }
  save_bundle(synth::render(synth::spec_from_json(j, a.seed), a.seed), a.out);
  std::cout << a.out << "\n";
  return 0;
}

int cmd_run(const RunArgs& a) {
  auto cfg = config_or_default(a.config);
  if (a.backend == "fixture") cfg.backend = BackendKind::fixture;
  else if (a.backend == "remote") cfg.backend = BackendKind::remote;
  else if (!a.backend.empty()) throw ConfigError("unknown backend '" + a.backend + "'");
  if (!a.endpoint.empty()) cfg.endpoint = a.endpoint;
  cfg.validate();

  const auto bundle = load_bundle(a.scene);
  std::unique_ptr<DetectorBackend> backend;
  if (cfg.backend == BackendKind::remote) {
    backend = std::make_unique<RemoteBackend>(cfg.endpoint);
  } else {
    backend = std::make_unique<FixtureBackend>(bundle.detections);
  }
  const auto r = run_pipeline(bundle, *backend, cfg, fs::path(a.out));
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
  if (!r.target_found()) {
    std::cerr << "target not found\n";
    return kExitTargetNotFound;
  }
  std::cout << "cleaning points: " << r.selection.clean.size()
            << ", waypoints: " << r.waypoints.size() << "\n";
  if (r.scores) std::cout << format_score_table({[&] {
    ScoreTableRow row{fs::path(a.scene).filename().string()};
    row.add(*r.scores);
    return row;
  }()});
  return 0;
}

int cmd_score(const ScoreArgs& a) {
  const auto bundle = load_bundle(a.scene);
  if (!bundle.ground_truth) throw ConfigError("score: scene has no ground truth");
  const auto masks = fs::path(a.run) / "masks";
  const auto eroded = read_mask(masks / "eroded_target.png");
  const auto non_target = read_mask(masks / "non_target.png");
  const auto c = compare_variants(eroded, non_target, *bundle.ground_truth);
  std::cout << to_json(c).dump(2) << "\n";
  ScoreTableRow row{fs::path(a.scene).filename().string()};
  row.add(c);
  std::cout << format_score_table({row});
  return 0;
}

int cmd_bench(const BenchArgs& a) {
  const auto cfg = config_or_default(a.config);
  cfg.validate();
  std::vector<fs::path> scenes;
  for (const auto& e : fs::directory_iterator(a.suite)) {
    if (e.is_directory() && fs::exists(e.path() / "rgb.png")) scenes.push_back(e.path());
  }
  std::sort(scenes.begin(), scenes.end());
  if (scenes.empty()) throw ConfigError("bench: no scene bundles under " + a.suite);

  std::map<std::string, ScoreTableRow> by_archetype;
  ScoreTableRow planted{"planted"}, all{"all"};
  for (const auto& dir : scenes) {
    const auto bundle = load_bundle(dir);
    if (!bundle.ground_truth) throw ConfigError("bench: " + dir.string() + " has no ground truth");
    FixtureBackend backend(bundle.detections);
    const auto r = run_pipeline(bundle, backend, cfg);
    VariantComparison c = r.scores ? *r.scores
                                   : compare_variants(r.masks.eroded_target, r.masks.non_target,
                                                      *bundle.ground_truth, cfg.score_tolerance_px);
    const std::string arch = bundle.info ? bundle.info->archetype : "unknown";
    auto [it, fresh] = by_archetype.try_emplace(arch, ScoreTableRow{arch});
    it->second.add(c);
    if (bundle.info && bundle.info->planted_fine_feature_error) planted.add(c);
    all.add(c);
  }
  std::vector<ScoreTableRow> rows;
  for (auto& [name, row] : by_archetype) rows.push_back(row);
  rows.push_back(planted);
  rows.push_back(all);
  std::cout << format_score_table(rows);
  return 0;
}

template <class F>
int guarded(F&& fn) {
  try {
    return fn();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.transport()) return kExitTransport;
    return e.validation() ? kExitValidation : kExitOther;
  } catch (const SafetyViolation& e) {
    std::cerr << "safety violation: " << e.what() << "\n";
    return kExitOther;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return kExitTransport;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const BundleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cleaning point selection and waypoint planning from RGB-D scene bundles"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Render synthetic scene bundles");
  g->add_option("--spec", gen.spec, "Scene spec JSON");
  g->add_flag("--standard-suite", gen.standard_suite, "Render the 24-scene standard suite");
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--out", gen.out, "Output directory")->required();

  RunArgs run;
  auto* r = app.add_subcommand("run", "Run the pipeline on one scene bundle");
  r->add_option("--scene", run.scene, "Scene bundle directory")->required();
  r->add_option("--config", run.config, "Pipeline config JSON");
  r->add_option("--backend", run.backend, "fixture or remote");
  r->add_option("--endpoint", run.endpoint, "Model server URL for the remote backend");
  r->add_option("--out", run.out, "Artifact directory")->required();

  ScoreArgs score;
  auto* s = app.add_subcommand("score", "Score a run's masks against ground truth");
  s->add_option("--run", score.run, "Run artifact directory")->required();
  s->add_option("--scene", score.scene, "Scene bundle directory")->required();

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Score every bundle in a suite directory");
  b->add_option("--suite", bench.suite, "Directory of scene bundles")->required();
  b->add_option("--config", bench.config, "Pipeline config JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  if (g->parsed()) return guarded([&] { return cmd_gen(gen); });
  if (r->parsed()) return guarded([&] { return cmd_run(run); });
  if (s->parsed()) return guarded([&] { return cmd_score(score); });
  return guarded([&] { return cmd_bench(bench); });
}
