#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "advs/classifier.hpp"

namespace advs {

enum class NormOrder { Linf, L2 };

/// The six attack kinds. PGD is an alias that runs LinfPGD.
enum class AttackKind { FGSM, FGM, PGD, LinfPGD, L2PGD, L2DeepFool };

inline constexpr std::array<AttackKind, 6> kAttackKinds = {AttackKind::FGSM,    AttackKind::FGM,
                                                           AttackKind::PGD,     AttackKind::LinfPGD,
                                                           AttackKind::L2PGD,   AttackKind::L2DeepFool};

inline constexpr std::size_t attack_index(AttackKind k) { return static_cast<std::size_t>(k); }
std::string_view attack_name(AttackKind k);
/// Case-insensitive; accepts the display names above.
AttackKind parse_attack(std::string_view name);

/// 0.001·2^k for k = 0..8, then 0.5.
std::vector<double> default_epsilon_grid();

inline constexpr int kDefaultPgdSteps = 40;
inline constexpr int kDefaultDeepFoolSteps = 50;

struct AttackConfig {
  /// Strictly ascending budgets; FGSM/FGM search them in order, PGD uses the last as its radius.
  std::vector<double> epsilons = default_epsilon_grid();
  /// Unset: 40 for PGD, 50 (iteration cap) for DeepFool.
  std::optional<int> steps;
  /// Unset: ε/10.
  std::optional<double> alpha;
  bool random_start = true;
  double overshoot = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
  int pgd_steps() const { return steps.value_or(kDefaultPgdSteps); }
  int deepfool_steps() const { return steps.value_or(kDefaultDeepFoolSteps); }
  double radius() const { return epsilons.back(); }
  double pgd_alpha() const { return alpha.value_or(radius() / 10); }

  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct AttackOutcome {
  Tensor adversarial;
  /// adversarial − original
  Tensor mask;
  /// The source model misclassifies `adversarial`.
  bool success = false;
  std::optional<double> epsilon_used;
  double linf_norm = 0;
  double l2_norm = 0;
  int iterations = 0;
};

struct DeepFoolStep {
  /// d(l, l₀) per class; +inf for the true class and for degenerate rivals.
  std::vector<double> distances;
  Index selected = 0;
};

struct DeepFoolTrace {
  std::vector<DeepFoolStep> steps;
};

/// Called with every PGD iterate after projection and clipping.
using IterateObserver = std::function<void(const Tensor&)>;

/// One gradient at x; returns the first ε on the grid whose sign step is adversarial.
AttackOutcome fgsm(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg);

/// As fgsm, stepping along g/‖g‖₂.
AttackOutcome fgm(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg);

/// Projected gradient ascent on the loss inside the ε-ball of the chosen norm.
AttackOutcome pgd(const Classifier& model, const Tensor& x, Index label, const AttackConfig& cfg, NormOrder order,
                  const IterateObserver& observe = {});

/// Iterated linearization toward the nearest class boundary in L2.
std::pair<AttackOutcome, DeepFoolTrace> deepfool_l2(const Classifier& model, const Tensor& x, Index label,
                                                    const AttackConfig& cfg);

AttackOutcome run_attack(AttackKind kind, const Classifier& model, const Tensor& x, Index label,
                         const AttackConfig& cfg);

/// Builds an outcome from an adversarial candidate: mask, norms and success flag.
AttackOutcome make_outcome(const Classifier& model, const Tensor& original, Tensor adversarial, Index label);

}  // namespace advs
