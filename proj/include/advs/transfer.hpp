#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advs/attacks.hpp"
#include "advs/dataset.hpp"

namespace advs {

/// How an attack built on the source model poisons target-channel imagery.
///   GradientAtTarget: the source model is attacked at the target-channel image.
///   MaskTransfer: the mask found on the source-channel image is added to the
///                 target-channel image.
enum class TransferMode { GradientAtTarget, MaskTransfer };

std::string_view mode_name(TransferMode mode);
TransferMode parse_mode(std::string_view name);

struct TransferCell {
  AttackKind attack = AttackKind::FGSM;
  Channel source = Channel::Visible;
  Channel target = Channel::Visible;
  double clean_accuracy = 0;
  double attacked_accuracy = 0;
  /// clean_accuracy − attacked_accuracy; negative when the attack helps.
  double delta = 0;
  int sample_count = 0;
  TransferMode mode = TransferMode::GradientAtTarget;

  friend bool operator==(const TransferCell&, const TransferCell&) = default;
};

using ModelSet = std::map<Channel, std::shared_ptr<const Classifier>>;

inline constexpr std::size_t kSurfaceCells = kAttackKinds.size() * kChannels.size() * kChannels.size();

/// Position of (attack, source, target) in enumeration order.
inline constexpr std::size_t cell_index(AttackKind a, Channel s, Channel t) {
  return (attack_index(a) * kChannels.size() + channel_index(s)) * kChannels.size() + channel_index(t);
}

struct SurfaceMatrix {
  std::vector<TransferCell> cells;
  std::size_t eval_size = 0;
  std::string eval_description;
  AttackConfig config;
  std::uint64_t seed = 0;
  TransferMode mode = TransferMode::GradientAtTarget;

  const TransferCell* find(AttackKind a, Channel s, Channel t) const;
  /// Throws Error when the cell is absent.
  const TransferCell& at(AttackKind a, Channel s, Channel t) const;
  /// "<attack>:<source>-><target>" for every key without a cell, in enumeration order.
  std::vector<std::string> missing_keys() const;
  /// Keys present more than once.
  std::vector<std::string> duplicate_keys() const;

  friend bool operator==(const SurfaceMatrix&, const SurfaceMatrix&) = default;
};

std::string cell_key(AttackKind a, Channel s, Channel t);

/// Fixed hash of (seed, attack, source, target) used as each cell's attack seed.
std::uint64_t cell_seed(std::uint64_t seed, AttackKind a, Channel s, Channel t);
/// Attack seed for the i-th scene of a cell.
std::uint64_t scene_seed(std::uint64_t cell, std::size_t scene);

/// One (attack, source, target) measurement over `eval`. cfg.seed is the cell seed.
TransferCell evaluate_cell(AttackKind attack, Channel source, Channel target, const ModelSet& models,
                           const Dataset& eval, const AttackConfig& cfg, TransferMode mode);

/// Every (attack, source, target) cell, filled in parallel. `execution_order`,
/// when given, is a permutation of [0, 216) fixing the order cells are
/// scheduled in; the result does not depend on it.
SurfaceMatrix build_surface(const ModelSet& models, const Dataset& eval, const AttackConfig& cfg, TransferMode mode,
                            std::uint64_t seed, std::span<const std::size_t> execution_order = {});

}  // namespace advs
