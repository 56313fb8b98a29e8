#pragma once

// The small seeded end-to-end run whose outputs are pinned in tests/golden.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "advs/surface.hpp"
#include "oracles.hpp"

namespace advs::fixture {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kSeed = 11;

inline ClassifierSpec spec() {
  ClassifierSpec s;
  s.input_size = 16;
  s.conv1_filters = 4;
  s.conv2_filters = 8;
  s.conv2_kernel = 2;
  s.hidden = 16;
  return s;
}

inline SynthConfig data_config() {
  SynthConfig c;
  c.image_size = 16;
  c.samples = 60;
  c.seed = kSeed;
  return c;
}

inline TrainConfig train_config() {
  TrainConfig t;
  t.epochs = 3;
  t.batch_size = 8;
  t.seed = kSeed;
  return t;
}

inline AttackConfig attack_config() {
  AttackConfig a;
  a.epsilons = {0.002, 0.008, 0.032, 0.1};
  a.steps = 5;
  a.seed = kSeed;
  return a;
}

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

struct Outputs {
  std::string sankey;
  std::string report;
  /// "<file> <fnv1a hex>" per triptych file.
  std::string triptych;
};

/// Runs generate → split → train ×6 → surface → report → triptychs, writing
/// the triptych files under `scratch`.
inline Outputs run(const fs::path& scratch) {
  const Dataset all = generate_synthetic(data_config());
  const auto [train_set, test_set] = split(all, 0.25, kSeed);
  ModelSet models;
  std::vector<ChannelMetrics> metrics;
  for (Channel c : kChannels) {
    auto m = std::make_shared<ChannelModel>(train(spec(), c, train_set, train_config()));
    metrics.push_back({c, {accuracy(*m, train_set, c), accuracy(*m, test_set, c)}});
    models[c] = m;
  }
  const Dataset eval = head(test_set, 6);
  SurfaceMatrix matrix = build_surface(models, eval, attack_config(), TransferMode::GradientAtTarget, kSeed);
  Provenance prov{"synthetic (fixture)", 0.25, kSeed, spec(), train_config()};
  const SurfaceReport report = make_report(std::move(matrix), kDefaultTau, prov, metrics);

  Outputs out;
  out.sankey = sankey_csv(report.matrix);
  out.report = report_json(report);
  const Scene& scene = eval.scenes.front();
  const Tensor x = decompose(scene, Channel::Visible);
  char hex[17];
  for (AttackKind k : kAttackKinds) {
    const std::string prefix = std::string(attack_name(k));
    render_triptych(x, run_attack(k, *models.at(Channel::Visible), x, scene.label, attack_config()),
                    (scratch / prefix).string());
    for (const char* part : {"_orig.ppm", "_mask.ppm", "_adv.ppm"}) {
      std::snprintf(hex, sizeof hex, "%016llx",
                    static_cast<unsigned long long>(oracle::fnv1a(slurp(scratch / (prefix + part)))));
      out.triptych += prefix + part + " " + hex + "\n";
    }
  }
  return out;
}

inline fs::path golden_dir() { return fs::path(ADVS_GOLDEN_DIR); }

/// With ADVS_UPDATE_GOLDEN set, rewrites the golden files from `o` first.
inline void maybe_update(const Outputs& o) {
  if (!std::getenv("ADVS_UPDATE_GOLDEN")) return;
  fs::create_directories(golden_dir());
  spit(golden_dir() / "sankey.csv", o.sankey);
  spit(golden_dir() / "report.json", o.report);
  spit(golden_dir() / "triptych.txt", o.triptych);
}

}  // namespace advs::fixture
