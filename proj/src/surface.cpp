#include "advs/surface.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "advs/image_io.hpp"

namespace advs {

using Json = nlohmann::ordered_json;

std::string_view mitigation_name(MitigationClass c) {
  return c == MitigationClass::PassiveAcceptable ? "PassiveAcceptable" : "ActiveNeeded";
}

MitigationClass parse_mitigation(std::string_view name) {
  if (name == "PassiveAcceptable") return MitigationClass::PassiveAcceptable;
  if (name == "ActiveNeeded") return MitigationClass::ActiveNeeded;
  throw FormatError("unknown mitigation class '" + std::string(name) + "'");
}

Recommendation recommend(const SurfaceMatrix& matrix, AttackKind attack, double tau) {
  if (!(tau > 0 && tau <= 1)) throw InvalidArgument("tau must be in (0, 1]");
  const auto missing = matrix.missing_keys();
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i) list += (i ? ", " : "") + missing[i];
    if (missing.size() > 8) list += ", ... (" + std::to_string(missing.size()) + " total)";
    throw Error("surface matrix is incomplete; missing " + list);
  }
  Recommendation best;
  best.attack = attack;
  best.worst_case_delta = std::numeric_limits<double>::infinity();
  for (Channel t : kChannels) {
    double worst = -std::numeric_limits<double>::infinity();
    for (Channel s : kChannels) worst = std::max(worst, matrix.at(attack, s, t).delta);
    if (worst < best.worst_case_delta) {
      best.worst_case_delta = worst;
      best.recommended_channel = t;
    }
  }
  best.classification = best.worst_case_delta <= tau ? MitigationClass::PassiveAcceptable : MitigationClass::ActiveNeeded;
  return best;
}

SurfaceReport make_report(SurfaceMatrix matrix, double tau, Provenance provenance,
                          std::vector<ChannelMetrics> channel_metrics, std::vector<ReferenceRow> reference) {
  if (!(tau > 0 && tau <= 1)) throw InvalidArgument("tau must be in (0, 1]");
  SurfaceReport r;
  r.matrix = std::move(matrix);
  r.tau = tau;
  r.provenance = std::move(provenance);
  r.channel_metrics = std::move(channel_metrics);
  r.reference = std::move(reference);
  bool all_passive = true;
  for (AttackKind a : kAttackKinds) {
    r.recommendations.push_back(recommend(r.matrix, a, tau));
    all_passive = all_passive && r.recommendations.back().classification == MitigationClass::PassiveAcceptable;
  }
  r.tier = all_passive ? "Tier 1" : "Tier 1 (partial: active measures needed)";
  return r;
}

std::map<AttackKind, MitigationClass> classify_attacks(const SurfaceReport& report) {
  std::map<AttackKind, MitigationClass> out;
  for (const Recommendation& r : report.recommendations) out[r.attack] = r.classification;
  return out;
}

std::vector<AttackKind> active_measures(const SurfaceReport& report) {
  std::vector<AttackKind> out;
  for (const auto& [attack, cls] : classify_attacks(report)) {
    if (cls == MitigationClass::ActiveNeeded) out.push_back(attack);
  }
  return out;
}

std::string sankey_csv(const SurfaceMatrix& matrix) {
  const auto missing = matrix.missing_keys();
  if (!missing.empty()) throw Error("surface matrix is incomplete; missing " + missing.front());
  std::string out = "source,target,value\n";
  char value[32];
  for (AttackKind a : kAttackKinds) {
    for (Channel s : kChannels) {
      for (Channel t : kChannels) {
        const double d = matrix.at(a, s, t).delta;
        std::snprintf(value, sizeof value, "%.4f", d > 0 ? d : 0.0);
        out += std::string(attack_name(a)) + ":" + std::string(channel_name(s)) + "," + std::string(channel_name(t)) +
               "," + value + "\n";
      }
    }
  }
  return out;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file << text;
  if (!file) throw IoError("short write to " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << file.rdbuf();
  return ss.str();
}

Json spec_json(const ClassifierSpec& s) {
  return Json{{"input_channels", s.input_channels}, {"input_size", s.input_size},
              {"conv1_filters", s.conv1_filters},   {"conv1_kernel", s.conv1_kernel},
              {"conv2_filters", s.conv2_filters},   {"conv2_kernel", s.conv2_kernel},
              {"hidden", s.hidden},                 {"num_classes", s.num_classes}};
}

ClassifierSpec spec_from(const Json& j) {
  ClassifierSpec s;
  s.input_channels = j.at("input_channels").get<Index>();
  s.input_size = j.at("input_size").get<Index>();
  s.conv1_filters = j.at("conv1_filters").get<Index>();
  s.conv1_kernel = j.at("conv1_kernel").get<Index>();
  s.conv2_filters = j.at("conv2_filters").get<Index>();
  s.conv2_kernel = j.at("conv2_kernel").get<Index>();
  s.hidden = j.at("hidden").get<Index>();
  s.num_classes = j.at("num_classes").get<Index>();
  return s;
}

Json optional_json(const auto& v) { return v ? Json(*v) : Json(nullptr); }

Json attack_config_json(const AttackConfig& c) {
  return Json{{"epsilons", c.epsilons},       {"steps", optional_json(c.steps)},
              {"alpha", optional_json(c.alpha)}, {"random_start", c.random_start},
              {"overshoot", c.overshoot},     {"seed", c.seed}};
}

AttackConfig attack_config_from(const Json& j) {
  AttackConfig c;
  c.epsilons = j.at("epsilons").get<std::vector<double>>();
  if (!j.at("steps").is_null()) c.steps = j.at("steps").get<int>();
  if (!j.at("alpha").is_null()) c.alpha = j.at("alpha").get<double>();
  c.random_start = j.at("random_start").get<bool>();
  c.overshoot = j.at("overshoot").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace

std::string report_json(const SurfaceReport& r) {
  const Provenance& p = r.provenance;
  Json doc;
  doc["format"] = "advs-surface-report";
  doc["version"] = 1;
  doc["config"] = Json{
      {"data_source", p.data_source},
      {"test_fraction", p.test_fraction},
      {"spec", spec_json(p.spec)},
      {"train",
       Json{{"epochs", p.train.epochs},
            {"batch_size", p.train.batch_size},
            {"learning_rate", p.train.learning_rate},
            {"momentum", p.train.momentum},
            {"seed", p.train.seed}}},
      {"attack", attack_config_json(r.matrix.config)},
      {"tau", r.tau},
  };
  doc["mode"] = mode_name(r.matrix.mode);
  doc["seeds"] = Json{{"global", p.seed}, {"surface", r.matrix.seed}};
  doc["eval"] = Json{{"size", r.matrix.eval_size}, {"description", r.matrix.eval_description}};

  Json table = Json::array();
  for (const ChannelMetrics& m : r.channel_metrics) {
    table.push_back(Json{{"channel", channel_name(m.channel)},
                         {"train_accuracy", m.metrics.train_accuracy},
                         {"test_accuracy", m.metrics.test_accuracy},
                         {"delta", m.metrics.delta()}});
  }
  doc["table1"] = std::move(table);
  Json reference = Json::array();
  for (const ReferenceRow& row : r.reference) {
    reference.push_back(
        Json{{"channel", row.channel}, {"train_accuracy", row.train_accuracy}, {"test_accuracy", row.test_accuracy}});
  }
  doc["table1_reference"] = std::move(reference);

  Json cells = Json::array();
  for (const TransferCell& c : r.matrix.cells) {
    cells.push_back(Json{{"attack", attack_name(c.attack)},
                         {"source", channel_name(c.source)},
                         {"target", channel_name(c.target)},
                         {"clean_accuracy", c.clean_accuracy},
                         {"attacked_accuracy", c.attacked_accuracy},
                         {"delta", c.delta},
                         {"sample_count", c.sample_count},
                         {"mode", mode_name(c.mode)}});
  }
  doc["cells"] = std::move(cells);

  Json recs = Json::array();
  Json classes = Json::object();
  for (const Recommendation& rec : r.recommendations) {
    recs.push_back(Json{{"attack", attack_name(rec.attack)},
                        {"recommended_channel", channel_name(rec.recommended_channel)},
                        {"worst_case_delta", rec.worst_case_delta},
                        {"classification", mitigation_name(rec.classification)}});
    classes[std::string(attack_name(rec.attack))] = mitigation_name(rec.classification);
  }
  doc["recommendations"] = std::move(recs);
  doc["classifications"] = std::move(classes);
  Json active = Json::array();
  for (AttackKind a : active_measures(r)) active.push_back(attack_name(a));
  doc["active_measures"] = std::move(active);
  doc["tier"] = r.tier;
  return doc.dump(2) + "\n";
}

void export_report(const SurfaceReport& report, const std::filesystem::path& path) {
  write_text(path, report_json(report));
}

void export_sankey(const SurfaceMatrix& matrix, const std::filesystem::path& path) {
  write_text(path, sankey_csv(matrix));
}

std::vector<std::string> check_report_schema(std::string_view text) {
  std::vector<std::string> problems;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    return {std::string("not a JSON document: ") + e.what()};
  }
  auto need = [&](const Json& obj, const std::string& where, const std::string& key, auto&& is_type,
                  const char* type) -> const Json* {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(where + key + ": missing");
      return nullptr;
    }
    if (!is_type(obj[key])) {
      problems.push_back(where + key + ": expected " + type);
      return nullptr;
    }
    return &obj[key];
  };
  const auto is_obj = [](const Json& j) { return j.is_object(); };
  const auto is_arr = [](const Json& j) { return j.is_array(); };
  const auto is_str = [](const Json& j) { return j.is_string(); };
  const auto is_num = [](const Json& j) { return j.is_number(); };
  const auto is_uint = [](const Json& j) { return j.is_number_unsigned(); };
  const auto is_frac = [](const Json& j) { return j.is_number() && j.get<double>() >= 0 && j.get<double>() <= 1; };
  const auto is_delta = [](const Json& j) { return j.is_number() && j.get<double>() >= -1 && j.get<double>() <= 1; };

  if (const Json* f = need(doc, "", "format", is_str, "string"); f && *f != "advs-surface-report") {
    problems.push_back("format: unexpected value");
  }
  need(doc, "", "version", is_uint, "unsigned integer");
  if (const Json* config = need(doc, "", "config", is_obj, "object")) {
    need(*config, "config.", "data_source", is_str, "string");
    need(*config, "config.", "test_fraction", is_frac, "fraction");
    need(*config, "config.", "spec", is_obj, "object");
    need(*config, "config.", "train", is_obj, "object");
    if (const Json* attack = need(*config, "config.", "attack", is_obj, "object")) {
      need(*attack, "config.attack.", "epsilons", is_arr, "array");
      need(*attack, "config.attack.", "seed", is_uint, "unsigned integer");
    }
    need(*config, "config.", "tau", is_frac, "fraction");
  }
  if (const Json* mode = need(doc, "", "mode", is_str, "string")) {
    try {
      parse_mode(mode->get<std::string>());
    } catch (const Error&) {
      problems.push_back("mode: unknown value");
    }
  }
  if (const Json* seeds = need(doc, "", "seeds", is_obj, "object")) {
    need(*seeds, "seeds.", "global", is_uint, "unsigned integer");
    need(*seeds, "seeds.", "surface", is_uint, "unsigned integer");
  }
  need(doc, "", "eval", is_obj, "object");
  if (const Json* table = need(doc, "", "table1", is_arr, "array")) {
    for (std::size_t i = 0; i < table->size(); ++i) {
      const std::string where = "table1[" + std::to_string(i) + "].";
      need((*table)[i], where, "channel", is_str, "string");
      need((*table)[i], where, "train_accuracy", is_frac, "fraction");
      need((*table)[i], where, "test_accuracy", is_frac, "fraction");
      need((*table)[i], where, "delta", is_delta, "number in [-1,1]");
    }
  }
  need(doc, "", "table1_reference", is_arr, "array");
  if (const Json* cells = need(doc, "", "cells", is_arr, "array")) {
    if (cells->size() != kSurfaceCells) {
      problems.push_back("cells: expected " + std::to_string(kSurfaceCells) + " entries, found " +
                         std::to_string(cells->size()));
    }
    for (std::size_t i = 0; i < cells->size(); ++i) {
      const std::string where = "cells[" + std::to_string(i) + "].";
      const Json& c = (*cells)[i];
      need(c, where, "attack", is_str, "string");
      need(c, where, "source", is_str, "string");
      need(c, where, "target", is_str, "string");
      need(c, where, "clean_accuracy", is_frac, "fraction");
      need(c, where, "attacked_accuracy", is_frac, "fraction");
      need(c, where, "delta", is_delta, "number in [-1,1]");
      need(c, where, "sample_count", is_uint, "unsigned integer");
      need(c, where, "mode", is_str, "string");
    }
  }
  if (const Json* recs = need(doc, "", "recommendations", is_arr, "array")) {
    if (recs->size() != kAttackKinds.size()) problems.push_back("recommendations: expected one per attack kind");
    for (std::size_t i = 0; i < recs->size(); ++i) {
      const std::string where = "recommendations[" + std::to_string(i) + "].";
      need((*recs)[i], where, "attack", is_str, "string");
      need((*recs)[i], where, "recommended_channel", is_str, "string");
      need((*recs)[i], where, "worst_case_delta", is_num, "number");
      need((*recs)[i], where, "classification", is_str, "string");
    }
  }
  need(doc, "", "classifications", is_obj, "object");
  need(doc, "", "active_measures", is_arr, "array");
  need(doc, "", "tier", is_str, "string");
  return problems;
}

SurfaceReport parse_report(std::string_view text) {
  const auto problems = check_report_schema(text);
  if (!problems.empty()) throw FormatError("report does not match schema: " + problems.front());
  try {
    const Json doc = Json::parse(text);
    SurfaceReport r;
    const Json& config = doc.at("config");
    r.provenance.data_source = config.at("data_source").get<std::string>();
    r.provenance.test_fraction = config.at("test_fraction").get<double>();
    r.provenance.spec = spec_from(config.at("spec"));
    const Json& train = config.at("train");
    r.provenance.train.epochs = train.at("epochs").get<int>();
    r.provenance.train.batch_size = train.at("batch_size").get<int>();
    r.provenance.train.learning_rate = train.at("learning_rate").get<double>();
    r.provenance.train.momentum = train.at("momentum").get<double>();
    r.provenance.train.seed = train.at("seed").get<std::uint64_t>();
    r.provenance.seed = doc.at("seeds").at("global").get<std::uint64_t>();
    r.tau = config.at("tau").get<double>();

    r.matrix.config = attack_config_from(config.at("attack"));
    r.matrix.mode = parse_mode(doc.at("mode").get<std::string>());
    r.matrix.seed = doc.at("seeds").at("surface").get<std::uint64_t>();
    r.matrix.eval_size = doc.at("eval").at("size").get<std::size_t>();
    r.matrix.eval_description = doc.at("eval").at("description").get<std::string>();

    for (const Json& row : doc.at("table1")) {
      r.channel_metrics.push_back({parse_channel(row.at("channel").get<std::string>()),
                                   {row.at("train_accuracy").get<double>(), row.at("test_accuracy").get<double>()}});
    }
    for (const Json& row : doc.at("table1_reference")) {
      r.reference.push_back({row.at("channel").get<std::string>(), row.at("train_accuracy").get<std::string>(),
                             row.at("test_accuracy").get<std::string>()});
    }
    for (const Json& c : doc.at("cells")) {
      TransferCell cell;
      cell.attack = parse_attack(c.at("attack").get<std::string>());
      cell.source = parse_channel(c.at("source").get<std::string>());
      cell.target = parse_channel(c.at("target").get<std::string>());
      cell.clean_accuracy = c.at("clean_accuracy").get<double>();
      cell.attacked_accuracy = c.at("attacked_accuracy").get<double>();
      cell.delta = c.at("delta").get<double>();
      cell.sample_count = c.at("sample_count").get<int>();
      cell.mode = parse_mode(c.at("mode").get<std::string>());
      r.matrix.cells.push_back(cell);
    }
    for (const Json& rec : doc.at("recommendations")) {
      r.recommendations.push_back({parse_attack(rec.at("attack").get<std::string>()),
                                   parse_channel(rec.at("recommended_channel").get<std::string>()),
                                   rec.at("worst_case_delta").get<double>(),
                                   parse_mitigation(rec.at("classification").get<std::string>())});
    }
    r.tier = doc.at("tier").get<std::string>();
    return r;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
}

SurfaceReport load_report(const std::filesystem::path& path) {
  try {
    return parse_report(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<ReferenceRow> load_reference(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::vector<ReferenceRow> rows;
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(trim(f));
    if (fields.size() != 3) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected channel,train,test");
    }
    if (rows.empty() && fields[0] == "channel") continue;
    rows.push_back({fields[0], fields[1], fields[2]});
  }
  return rows;
}

Tensor mask_image(const Tensor& mask) {
  const double maxabs = mask.size() ? mask.data().abs().maxCoeff() : 0.0;
  if (maxabs == 0) return Tensor::constant(mask.shape(), 0.5);
  return Tensor(mask.shape(), 0.5 + mask.data() / (2 * maxabs));
}

void render_triptych(const Tensor& original, const AttackOutcome& outcome, const std::string& prefix) {
  if (outcome.mask.shape() != original.shape()) {
    throw ShapeError("mask " + shape_string(outcome.mask.shape()) + " does not match image " +
                     shape_string(original.shape()));
  }
  write_ppm(prefix + "_orig.ppm", original);
  write_ppm(prefix + "_mask.ppm", mask_image(outcome.mask));
  write_ppm(prefix + "_adv.ppm", Tensor(original.shape(), (original.data() + outcome.mask.data()).max(0.0).min(1.0)));
}

}  // namespace advs
