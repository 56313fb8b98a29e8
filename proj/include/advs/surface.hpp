#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "advs/model.hpp"
#include "advs/transfer.hpp"

namespace advs {

enum class MitigationClass { PassiveAcceptable, ActiveNeeded };

std::string_view mitigation_name(MitigationClass c);
MitigationClass parse_mitigation(std::string_view name);

struct Recommendation {
  AttackKind attack = AttackKind::FGSM;
  Channel recommended_channel = Channel::Visible;
  /// Max over source channels of the recommended channel's delta.
  double worst_case_delta = 0;
  MitigationClass classification = MitigationClass::ActiveNeeded;

  friend bool operator==(const Recommendation&, const Recommendation&) = default;
};

inline constexpr double kDefaultTau = 0.15;

/// Minimax channel choice for one attack: the target whose worst delta over
/// all sources is smallest, ties going to the earlier channel. Passive when
/// that worst case is at most tau. Throws Error listing missing cells.
Recommendation recommend(const SurfaceMatrix& matrix, AttackKind attack, double tau = kDefaultTau);

struct ChannelMetrics {
  Channel channel = Channel::Visible;
  Metrics metrics;

  friend bool operator==(const ChannelMetrics&, const ChannelMetrics&) = default;
};

/// An externally supplied train/test pair, carried into the report verbatim.
struct ReferenceRow {
  std::string channel;
  std::string train_accuracy;
  std::string test_accuracy;

  friend bool operator==(const ReferenceRow&, const ReferenceRow&) = default;
};

/// Where the numbers came from.
struct Provenance {
  std::string data_source;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  ClassifierSpec spec;
  TrainConfig train;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct SurfaceReport {
  SurfaceMatrix matrix;
  double tau = kDefaultTau;
  std::vector<Recommendation> recommendations;
  std::string tier;
  std::vector<ChannelMetrics> channel_metrics;
  std::vector<ReferenceRow> reference;
  Provenance provenance;

  friend bool operator==(const SurfaceReport&, const SurfaceReport&) = default;
};

/// Recommendations for every attack kind plus the tier label.
SurfaceReport make_report(SurfaceMatrix matrix, double tau, Provenance provenance,
                          std::vector<ChannelMetrics> channel_metrics = {}, std::vector<ReferenceRow> reference = {});

std::map<AttackKind, MitigationClass> classify_attacks(const SurfaceReport& report);
/// Attacks no channel choice mitigates, in enumeration order.
std::vector<AttackKind> active_measures(const SurfaceReport& report);

/// Header `source,target,value`, one row per cell in enumeration order,
/// value = max(delta, 0) to 4 decimals.
std::string sankey_csv(const SurfaceMatrix& matrix);
void export_sankey(const SurfaceMatrix& matrix, const std::filesystem::path& path);

std::string report_json(const SurfaceReport& report);
void export_report(const SurfaceReport& report, const std::filesystem::path& path);
SurfaceReport parse_report(std::string_view text);
SurfaceReport load_report(const std::filesystem::path& path);
/// Schema problems in a report document; empty when it conforms.
std::vector<std::string> check_report_schema(std::string_view text);

/// Reads `channel,train,test` lines (header optional) for the reference block.
std::vector<ReferenceRow> load_reference(const std::filesystem::path& path);

/// Writes `<prefix>_orig.ppm`, `<prefix>_mask.ppm` and `<prefix>_adv.ppm`.
/// The mask is mapped affinely from [−maxabs, maxabs] to [0,1].
void render_triptych(const Tensor& original, const AttackOutcome& outcome, const std::string& prefix);

/// The mask image as written by render_triptych.
Tensor mask_image(const Tensor& mask);

}  // namespace advs
