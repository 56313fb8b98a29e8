#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "advs/tensor.hpp"

namespace advs {

/// Spectral rendering a classifier is trained on. Declaration order is the
/// enumeration order used for tie-breaking and report layout.
enum class Channel { Visible, Gray, IR, Red, Green, Blue };

inline constexpr std::array<Channel, 6> kChannels = {Channel::Visible, Channel::Gray,  Channel::IR,
                                                     Channel::Red,     Channel::Green, Channel::Blue};

inline constexpr std::size_t channel_index(Channel c) { return static_cast<std::size_t>(c); }
std::string_view channel_name(Channel c);
/// Accepts the display name or a lowercase alias ("vis", "gray", "ir", ...).
Channel parse_channel(std::string_view name);

/// BT.601 luma weights used for the Gray channel.
inline constexpr double kLumaRed = 0.299;
inline constexpr double kLumaGreen = 0.587;
inline constexpr double kLumaBlue = 0.114;

/// One registered observation: a visible RGB image and a rectified IR image
/// of the same footprint.
struct Scene {
  std::string id;
  Tensor visible;  // 3×H×W, values in [0,1]
  Tensor ir;       // 1×H×W, values in [0,1]
  int label = 0;
};

enum class SplitTag { All, Train, Test };

struct Dataset {
  std::vector<Scene> scenes;
  std::vector<std::string> class_names;
  SplitTag split = SplitTag::All;

  std::size_t size() const { return scenes.size(); }
  bool empty() const { return scenes.empty(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }

  /// Throws InvalidArgument naming the first offending scene.
  void validate() const;
};

struct SynthConfig {
  int num_classes = 4;
  int image_size = 32;
  int samples = 2500;
  std::uint64_t seed = 0;
  /// How much the IR signature texture mimics visible luminance.
  double channel_correlation = 0.2;
  double noise_level = 0.006;
  /// Amplitude of the class signal over the background, in intensity units.
  double contrast = 0.03;

  void validate() const;
};

/// Renders a scene as seen by one channel. Every channel yields a 3×H×W
/// image; single-band channels are replicated across the three planes.
Tensor decompose(const Scene& scene, Channel channel);

/// Reads `labels.csv` plus `<id>_vis.ppm` / `<id>_ir.pgm` per scene. An
/// optional `classes.txt` (one name per line) fixes the class count;
/// otherwise it is one more than the largest label. Scenes are ordered by id.
Dataset load_dataset(const std::filesystem::path& directory);

/// Writes the layout read by `load_dataset`, including `classes.txt`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& directory);

/// Seeded synthetic multi-spectral scenes, labels assigned round-robin.
/// Pixel values lie on the 8-bit grid so a save/load cycle is exact.
Dataset generate_synthetic(const SynthConfig& cfg);

/// Disjoint, exhaustive, label-stratified split. The test share of each
/// class is rounded by largest remainder so the total matches
/// round(size · test_fraction).
std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed);

/// First `count` scenes (all of them when count exceeds the size).
Dataset head(const Dataset& dataset, std::size_t count);

}  // namespace advs
