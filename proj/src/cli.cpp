#include "advs/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>

#include <CLI11.hpp>

#include "advs/image_io.hpp"
#include "advs/surface.hpp"

namespace advs {

namespace fs = std::filesystem;

namespace {

struct DataOptions {
  std::string dir;
  SynthConfig synth;
  double test_fraction = 0.2;
};

void add_synth_options(CLI::App& cmd, SynthConfig& s) {
  cmd.add_option("--classes", s.num_classes, "Synthetic class count")->capture_default_str();
  cmd.add_option("--samples", s.samples, "Synthetic scene count")->capture_default_str();
  cmd.add_option("--size", s.image_size, "Synthetic image extent")->capture_default_str();
  cmd.add_option("--rho", s.channel_correlation, "IR/visible texture correlation")->capture_default_str();
  cmd.add_option("--noise", s.noise_level, "Uniform pixel noise half-width")->capture_default_str();
  cmd.add_option("--contrast", s.contrast, "Class signal amplitude")->capture_default_str();
}

void add_data_options(CLI::App& cmd, DataOptions& d) {
  cmd.add_option("--data", d.dir, "Dataset directory (synthetic scenes when omitted)");
  add_synth_options(cmd, d.synth);
  cmd.add_option("--test-fraction", d.test_fraction, "Share of scenes held out for testing")->capture_default_str();
}

void add_attack_options(CLI::App& cmd, AttackConfig& a, bool& no_random_start) {
  cmd.add_option("--eps", a.epsilons, "Ascending epsilon list (comma separated)")->delimiter(',');
  cmd.add_option("--steps", a.steps, "PGD steps / DeepFool iteration cap");
  cmd.add_option("--alpha", a.alpha, "PGD step size");
  cmd.add_flag("--no-random-start", no_random_start, "Start PGD at the clean image");
  cmd.add_option("--overshoot", a.overshoot, "DeepFool overshoot")->capture_default_str();
}

Dataset load_data(const DataOptions& d, std::uint64_t seed) {
  if (!d.dir.empty()) return load_dataset(d.dir);
  SynthConfig s = d.synth;
  s.seed = seed;
  return generate_synthetic(s);
}

std::string describe_data(const DataOptions& d, std::uint64_t seed) {
  if (!d.dir.empty()) return "directory " + d.dir;
  std::ostringstream ss;
  ss << "synthetic classes=" << d.synth.num_classes << " size=" << d.synth.image_size << " samples=" << d.synth.samples
     << " rho=" << d.synth.channel_correlation << " noise=" << d.synth.noise_level
     << " contrast=" << d.synth.contrast << " seed=" << seed;
  return ss.str();
}

std::vector<Channel> parse_channels(const std::string& name) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "all") return {kChannels.begin(), kChannels.end()};
  return {parse_channel(name)};
}

fs::path model_path(const fs::path& dir, Channel c) { return dir / (std::string(channel_name(c)) + ".advs"); }

std::string percent(double v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100 * v);
  return buf;
}

void print_table_header(std::ostream& out) { out << "Channel\tTraining Accuracy\tTest Accuracy\tDelta\n"; }

void print_table_row(std::ostream& out, Channel c, const Metrics& m) {
  out << channel_name(c) << '\t' << percent(m.train_accuracy) << '\t' << percent(m.test_accuracy) << '\t'
      << percent(m.delta()) << '\n';
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

ClassifierSpec spec_for(const Dataset& ds) {
  if (ds.empty()) throw InvalidArgument("dataset is empty");
  const Scene& first = ds.scenes.front();
  if (first.visible.dim(1) != first.visible.dim(2)) {
    throw InvalidArgument("classifier needs square images, scene " + first.id + " is not");
  }
  ClassifierSpec spec;
  spec.num_classes = ds.num_classes();
  spec.input_size = first.visible.dim(1);
  return spec;
}

const Scene& find_scene(const Dataset& ds, const std::string& id) {
  for (const Scene& s : ds.scenes) {
    if (s.id == id) return s;
  }
  throw InvalidArgument("no scene with id " + id);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Per-channel classifiers, white-box attacks and cross-channel adversarial surfaces", "advs"};
  app.require_subcommand(1);
  // One file can configure every command: `[train]`, `[surface]`, ... sections.
  app.set_config("--config", "", "TOML/INI file with per-command sections; flags take precedence");
  app.allow_config_extras(CLI::config_extras_mode::error);

  std::uint64_t seed = 0;
  DataOptions data;

  // gen
  std::string gen_out;
  SynthConfig gen_cfg;
  auto* gen = app.add_subcommand("gen", "Write a synthetic dataset directory");
  gen->add_option("--out", gen_out, "Output directory")->required();
  add_synth_options(*gen, gen_cfg);
  gen->add_option("--seed", seed, "Generator seed")->capture_default_str();

  // train
  std::string channel_arg = "all", train_out;
  TrainConfig train_cfg;
  auto* train_cmd = app.add_subcommand("train", "Train channel classifiers and print train/test accuracy");
  add_data_options(*train_cmd, data);
  train_cmd->add_option("--channel", channel_arg, "Channel name or 'all'")->capture_default_str();
  train_cmd->add_option("--epochs", train_cfg.epochs)->capture_default_str();
  train_cmd->add_option("--batch", train_cfg.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", train_cfg.learning_rate)->capture_default_str();
  train_cmd->add_option("--momentum", train_cfg.momentum)->capture_default_str();
  train_cmd->add_option("--seed", seed, "Seeds data, split and initialization")->capture_default_str();
  train_cmd->add_option("--out", train_out, "Model file (one channel) or directory (all)");

  // attack
  std::string attack_model, attack_kind, attack_scene, attack_out;
  AttackConfig attack_cfg;
  bool attack_fixed_start = false;
  auto* attack_cmd = app.add_subcommand("attack", "Attack one scene and write the mask triptych");
  add_data_options(*attack_cmd, data);
  attack_cmd->add_option("--model", attack_model, "Model file")->required();
  attack_cmd->add_option("--kind", attack_kind, "FGSM, FGM, PGD, LinfPGD, L2PGD or L2DeepFool")->required();
  attack_cmd->add_option("--scene", attack_scene, "Scene id (first test scene when omitted)");
  attack_cmd->add_option("--out", attack_out, "Triptych file prefix");
  attack_cmd->add_option("--seed", seed, "Seeds data, split and attack")->capture_default_str();
  add_attack_options(*attack_cmd, attack_cfg, attack_fixed_start);

  // surface
  std::string models_dir, surface_out = "surface", mode_arg = "GradientAtTarget", reference_path;
  double tau = kDefaultTau;
  std::size_t eval_samples = 0;
  AttackConfig surface_cfg;
  TrainConfig surface_train;
  bool surface_fixed_start = false;
  auto* surface_cmd = app.add_subcommand("surface", "Evaluate the full cross-channel surface and recommend channels");
  add_data_options(*surface_cmd, data);
  surface_cmd->add_option("--models", models_dir, "Directory holding <Channel>.advs files")->required();
  surface_cmd->add_option("--mode", mode_arg, "GradientAtTarget or MaskTransfer")->capture_default_str();
  surface_cmd->add_option("--tau", tau, "Passive/active threshold")->capture_default_str();
  surface_cmd->add_option("--seed", seed, "Seeds data, split and attacks")->capture_default_str();
  surface_cmd->add_option("--out", surface_out, "Output directory")->capture_default_str();
  surface_cmd->add_option("--eval-samples", eval_samples, "Limit the test split to its first N scenes (0 = all)");
  surface_cmd->add_option("--reference", reference_path, "channel,train,test rows reported verbatim");
  add_attack_options(*surface_cmd, surface_cfg, surface_fixed_start);
  // Recorded in the report only; the models are already trained.
  surface_cmd->add_option("--epochs", surface_train.epochs, "Training epochs the models used")->capture_default_str();
  surface_cmd->add_option("--batch", surface_train.batch_size)->capture_default_str();
  surface_cmd->add_option("--lr", surface_train.learning_rate)->capture_default_str();
  surface_cmd->add_option("--momentum", surface_train.momentum)->capture_default_str();

  try {
    // --config belongs to the top-level app; accept it after the command name too.
    std::vector<std::string> ordered;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        ordered.push_back(args[i]);
        ordered.push_back(args[++i]);
      } else if (args[i].rfind("--config=", 0) == 0) {
        ordered.push_back(args[i]);
      } else {
        rest.push_back(args[i]);
      }
    }
    ordered.insert(ordered.end(), rest.begin(), rest.end());
    std::vector<std::string> reversed(ordered.rbegin(), ordered.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "advs: error: " << msg << '\n';
    return 2;
  }

  try {
    if (*gen) {
      gen_cfg.seed = seed;
      const Dataset ds = generate_synthetic(gen_cfg);
      save_dataset(ds, gen_out);
      out << "wrote " << ds.size() << " scenes (" << ds.num_classes() << " classes, " << gen_cfg.image_size << "x"
          << gen_cfg.image_size << ") to " << gen_out << '\n';
    } else if (*train_cmd) {
      train_cfg.seed = seed;
      train_cfg.validate();
      const std::vector<Channel> channels = parse_channels(channel_arg);
      const Dataset ds = load_data(data, seed);
      const auto [train_set, test_set] = split(ds, data.test_fraction, seed);
      const ClassifierSpec spec = spec_for(ds);
      const bool many = channels.size() > 1;
      const fs::path target = train_out.empty() ? fs::path(many ? "models" : "") : fs::path(train_out);
      if (many) ensure_directory(target);
      print_table_header(out);
      for (Channel c : channels) {
        const ChannelModel m = train(spec, c, train_set, train_cfg);
        const Metrics metrics{accuracy(m, train_set, c), accuracy(m, test_set, c)};
        const fs::path file = many ? model_path(target, c) : (train_out.empty() ? model_path(".", c) : target);
        save_model(m, file);
        print_table_row(out, c, metrics);
      }
    } else if (*attack_cmd) {
      attack_cfg.random_start = !attack_fixed_start;
      attack_cfg.seed = seed;
      attack_cfg.validate();
      const AttackKind kind = parse_attack(attack_kind);
      const ChannelModel m = load_model(attack_model);
      const Dataset ds = load_data(data, seed);
      const Scene* scene = nullptr;
      if (!attack_scene.empty()) {
        scene = &find_scene(ds, attack_scene);
      } else {
        const auto parts = split(ds, data.test_fraction, seed);
        scene = &find_scene(ds, parts.second.scenes.front().id);
      }
      const Tensor x = decompose(*scene, m.channel());
      const AttackOutcome o = run_attack(kind, m, x, scene->label, attack_cfg);
      const std::string prefix =
          attack_out.empty() ? std::string(attack_name(kind)) + "_" + scene->id : attack_out;
      render_triptych(x, o, prefix);
      char norms[96];
      std::snprintf(norms, sizeof norms, "linf=%.6g l2=%.6g", o.linf_norm, o.l2_norm);
      out << "attack=" << attack_name(kind) << " model=" << channel_name(m.channel()) << " scene=" << scene->id
          << " label=" << scene->label << " clean=" << predicted_class(m, x)
          << " adversarial=" << predicted_class(m, o.adversarial) << " success=" << (o.success ? "true" : "false")
          << " epsilon=";
      if (o.epsilon_used) {
        out << *o.epsilon_used;
      } else {
        out << "none";
      }
      out << ' ' << norms << " iterations=" << o.iterations << '\n';
      out << "wrote " << prefix << "_orig.ppm " << prefix << "_mask.ppm " << prefix << "_adv.ppm\n";
    } else if (*surface_cmd) {
      surface_cfg.random_start = !surface_fixed_start;
      surface_cfg.seed = seed;
      surface_cfg.validate();
      if (!(tau > 0 && tau <= 1)) throw InvalidArgument("tau must be in (0, 1]");
      const TransferMode mode = parse_mode(mode_arg);

      ModelSet models;
      std::vector<ChannelModel> loaded;
      for (Channel c : kChannels) {
        const fs::path file = model_path(models_dir, c);
        if (!fs::exists(file)) {
          throw IoError("missing model for channel " + std::string(channel_name(c)) + " (expected " + file.string() +
                        ")");
        }
        loaded.push_back(load_model(file));
        if (loaded.back().channel() != c) {
          throw FormatError(file.string() + " holds a " + std::string(channel_name(loaded.back().channel())) +
                            " model");
        }
        if (!(loaded.back().spec() == loaded.front().spec())) {
          throw InvalidArgument("model for channel " + std::string(channel_name(c)) +
                                " does not share the common classifier spec");
        }
      }
      for (std::size_t i = 0; i < loaded.size(); ++i) {
        models[kChannels[i]] = std::make_shared<ChannelModel>(std::move(loaded[i]));
      }

      const Dataset ds = load_data(data, seed);
      if (ds.num_classes() != loaded.front().spec().num_classes && !ds.empty()) {
        throw InvalidArgument("dataset has " + std::to_string(ds.num_classes()) + " classes, models have " +
                              std::to_string(loaded.front().spec().num_classes));
      }
      const auto [train_set, test_set] = split(ds, data.test_fraction, seed);
      const Dataset eval = eval_samples ? head(test_set, eval_samples) : test_set;

      std::vector<ChannelMetrics> metrics;
      for (Channel c : kChannels) {
        const Classifier& m = *models.at(c);
        metrics.push_back({c, {accuracy(m, train_set, c), accuracy(m, test_set, c)}});
      }
      std::vector<ReferenceRow> reference;
      if (!reference_path.empty()) reference = load_reference(reference_path);

      SurfaceMatrix matrix = build_surface(models, eval, surface_cfg, mode, seed);
      Provenance provenance{describe_data(data, seed), data.test_fraction, seed, loaded.front().spec(), surface_train};
      provenance.train.seed = seed;
      const SurfaceReport report = make_report(std::move(matrix), tau, provenance, metrics, reference);

      ensure_directory(surface_out);
      export_report(report, fs::path(surface_out) / "report.json");
      export_sankey(report.matrix, fs::path(surface_out) / "sankey.csv");

      print_table_header(out);
      for (const ChannelMetrics& m : metrics) print_table_row(out, m.channel, m.metrics);
      char line[160];
      for (const Recommendation& r : report.recommendations) {
        std::snprintf(line, sizeof line, "%-10s recommend %-7s worst-case delta %.4f  %s\n",
                      std::string(attack_name(r.attack)).c_str(), std::string(channel_name(r.recommended_channel)).c_str(),
                      r.worst_case_delta, std::string(mitigation_name(r.classification)).c_str());
        out << line;
      }
      out << "tier: " << report.tier << '\n';
      out << "wrote " << (fs::path(surface_out) / "report.json").string() << ' '
          << (fs::path(surface_out) / "sankey.csv").string() << '\n';
    }
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "advs: error: " << msg << '\n';
    return 1;
  }
  return 0;
}

}  // namespace advs
