#include "advs/transfer.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "advs/parallel.hpp"

namespace advs {

std::string_view mode_name(TransferMode mode) {
  return mode == TransferMode::GradientAtTarget ? "GradientAtTarget" : "MaskTransfer";
}

TransferMode parse_mode(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "gradientattarget" || lower == "gradient") return TransferMode::GradientAtTarget;
  if (lower == "masktransfer" || lower == "mask") return TransferMode::MaskTransfer;
  throw InvalidArgument("unknown transfer mode '" + std::string(name) + "' (expected GradientAtTarget or MaskTransfer)");
}

std::string cell_key(AttackKind a, Channel s, Channel t) {
  return std::string(attack_name(a)) + ":" + std::string(channel_name(s)) + "->" + std::string(channel_name(t));
}

const TransferCell* SurfaceMatrix::find(AttackKind a, Channel s, Channel t) const {
  // Cells are normally stored in enumeration order; fall back to a scan otherwise.
  const std::size_t i = cell_index(a, s, t);
  if (i < cells.size() && cells[i].attack == a && cells[i].source == s && cells[i].target == t) return &cells[i];
  for (const TransferCell& c : cells) {
    if (c.attack == a && c.source == s && c.target == t) return &c;
  }
  return nullptr;
}

const TransferCell& SurfaceMatrix::at(AttackKind a, Channel s, Channel t) const {
  const TransferCell* c = find(a, s, t);
  if (!c) throw Error("surface has no cell " + cell_key(a, s, t));
  return *c;
}

std::vector<std::string> SurfaceMatrix::missing_keys() const {
  std::vector<char> seen(kSurfaceCells, 0);
  for (const TransferCell& c : cells) seen[cell_index(c.attack, c.source, c.target)] = 1;
  std::vector<std::string> out;
  for (AttackKind a : kAttackKinds)
    for (Channel s : kChannels)
      for (Channel t : kChannels)
        if (!seen[cell_index(a, s, t)]) out.push_back(cell_key(a, s, t));
  return out;
}

std::vector<std::string> SurfaceMatrix::duplicate_keys() const {
  std::vector<int> count(kSurfaceCells, 0);
  std::vector<std::string> out;
  for (const TransferCell& c : cells) {
    if (++count[cell_index(c.attack, c.source, c.target)] == 2) out.push_back(cell_key(c.attack, c.source, c.target));
  }
  return out;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

const Classifier& require_model(const ModelSet& models, Channel c) {
  const auto it = models.find(c);
  if (it == models.end() || !it->second) throw InvalidArgument("no model for channel " + std::string(channel_name(c)));
  return *it->second;
}

Eigen::ArrayXd clip_unit(const Eigen::ArrayXd& v) { return v.max(0.0).min(1.0); }

}  // namespace

std::uint64_t cell_seed(std::uint64_t seed, AttackKind a, Channel s, Channel t) {
  std::uint64_t h = splitmix(seed);
  for (std::uint64_t v : {attack_index(a), channel_index(s), channel_index(t)}) h = splitmix(h ^ v);
  return h;
}

std::uint64_t scene_seed(std::uint64_t cell, std::size_t scene) { return splitmix(cell ^ splitmix(scene)); }

TransferCell evaluate_cell(AttackKind attack, Channel source, Channel target, const ModelSet& models,
                           const Dataset& eval, const AttackConfig& cfg, TransferMode mode) {
  const Classifier& source_model = require_model(models, source);
  const Classifier& target_model = require_model(models, target);
  if (eval.empty()) throw InvalidArgument("evaluation set is empty");
  cfg.validate();

  std::size_t clean = 0, survived = 0;
  AttackConfig scene_cfg = cfg;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    const Scene& scene = eval.scenes[i];
    const Tensor x_t = decompose(scene, target);
    if (predicted_class(target_model, x_t) == scene.label) ++clean;

    scene_cfg.seed = scene_seed(cfg.seed, i);
    Tensor adversarial;
    if (mode == TransferMode::GradientAtTarget || source == target) {
      // With source == target the mask is taken on x_t itself, so x_t + mask
      // is the outcome's adversarial; reuse it to keep both modes bit-identical.
      adversarial = run_attack(attack, source_model, x_t, scene.label, scene_cfg).adversarial;
    } else {
      const AttackOutcome o = run_attack(attack, source_model, decompose(scene, source), scene.label, scene_cfg);
      adversarial = Tensor(x_t.shape(), clip_unit(x_t.data() + o.mask.data()));
    }
    if (predicted_class(target_model, adversarial) == scene.label) ++survived;
  }

  TransferCell cell;
  cell.attack = attack;
  cell.source = source;
  cell.target = target;
  cell.sample_count = static_cast<int>(eval.size());
  cell.clean_accuracy = static_cast<double>(clean) / static_cast<double>(eval.size());
  cell.attacked_accuracy = static_cast<double>(survived) / static_cast<double>(eval.size());
  cell.delta = cell.clean_accuracy - cell.attacked_accuracy;
  cell.mode = mode;
  return cell;
}

SurfaceMatrix build_surface(const ModelSet& models, const Dataset& eval, const AttackConfig& cfg, TransferMode mode,
                            std::uint64_t seed, std::span<const std::size_t> execution_order) {
  for (Channel c : kChannels) require_model(models, c);
  if (eval.empty()) throw InvalidArgument("evaluation set is empty");
  cfg.validate();

  std::vector<std::size_t> order(kSurfaceCells);
  if (execution_order.empty()) {
    std::iota(order.begin(), order.end(), 0);
  } else {
    order.assign(execution_order.begin(), execution_order.end());
    std::vector<std::size_t> sorted = order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> identity(kSurfaceCells);
    std::iota(identity.begin(), identity.end(), 0);
    if (sorted != identity) throw InvalidArgument("execution order must be a permutation of the cell indices");
  }

  SurfaceMatrix m;
  m.cells.resize(kSurfaceCells);
  m.eval_size = eval.size();
  m.eval_description = std::to_string(eval.size()) + " scenes";
  if (!eval.empty()) m.eval_description += " (" + eval.scenes.front().id + " .. " + eval.scenes.back().id + ")";
  m.config = cfg;
  m.seed = seed;
  m.mode = mode;

  parallel_for(order.size(), [&](std::size_t k) {
    const std::size_t i = order[k];
    const AttackKind a = kAttackKinds[i / (kChannels.size() * kChannels.size())];
    const Channel s = kChannels[(i / kChannels.size()) % kChannels.size()];
    const Channel t = kChannels[i % kChannels.size()];
    AttackConfig cell_cfg = cfg;
    cell_cfg.seed = cell_seed(seed, a, s, t);
    m.cells[i] = evaluate_cell(a, s, t, models, eval, cell_cfg, mode);
  });
  return m;
}

}  // namespace advs
