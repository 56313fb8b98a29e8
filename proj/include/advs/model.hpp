#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "advs/classifier.hpp"
#include "advs/dataset.hpp"

namespace advs {

/// conv → relu → maxpool2 → conv → relu → maxpool2 → dense → relu → dense.
///
/// Both convolutions are valid (unpadded), so the kernel sizes must leave
/// even extents for each pooling stage. With a 32×32 input the defaults
/// give 30 → 15 → 12 → 6.
struct ClassifierSpec {
  Index input_channels = 3;
  Index input_size = 32;
  Index conv1_filters = 16;
  Index conv1_kernel = 3;
  Index conv2_filters = 32;
  Index conv2_kernel = 4;
  Index hidden = 64;
  Index num_classes = 4;

  void validate() const;
  Shape input_shape() const { return {input_channels, input_size, input_size}; }
  /// Spatial extent after the second pooling stage.
  Index feature_size() const;
  Index flat_features() const { return conv2_filters * feature_size() * feature_size(); }
  /// Parameter tensor shapes in storage order.
  std::vector<Shape> layer_shapes() const;
  Index parameter_count() const;

  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

struct TrainConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochStats {
  double loss = 0;
  double accuracy = 0;
};

struct Metrics {
  double train_accuracy = 0;
  double test_accuracy = 0;
  double delta() const { return train_accuracy - test_accuracy; }
  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Glorot-uniform weights, zero biases, flattened in `layer_shapes()` order.
Eigen::VectorXd init_params(const ClassifierSpec& spec, std::uint64_t seed);

/// Records the classifier forward pass given one handle per parameter tensor.
Var64 classifier_forward(const ClassifierSpec& spec, Var64 input, std::span<const Var64> params);

/// Fixed input standardization (x − mean) / stddev applied ahead of the
/// network. Fitted once on the training pixels of a channel.
struct InputScaling {
  double mean = 0;
  double stddev = 1;

  static InputScaling fit(const std::vector<Tensor>& inputs);
  friend bool operator==(const InputScaling&, const InputScaling&) = default;
};

/// A classifier bound to one channel.
class ChannelModel final : public Classifier {
 public:
  ChannelModel(Channel channel, ClassifierSpec spec, const Eigen::VectorXd& parameters, InputScaling scaling = {});

  Channel channel() const { return channel_; }
  const ClassifierSpec& spec() const { return spec_; }
  Eigen::VectorXd parameters() const;
  const std::vector<Tensor>& layers() const { return layers_; }
  const InputScaling& scaling() const { return scaling_; }

  std::vector<EpochStats> history;

  Shape input_shape() const override { return spec_.input_shape(); }
  Index num_classes() const override { return spec_.num_classes; }
  Var64 forward(Graph64& graph, Var64 input) const override;

 private:
  Channel channel_;
  ClassifierSpec spec_;
  InputScaling scaling_;
  std::vector<Tensor> layers_;
};

/// Minibatch SGD with momentum on softmax cross-entropy over
/// `decompose(scene, channel)` inputs. Epoch order is reshuffled from
/// (seed, epoch); the result is a deterministic function of its arguments.
ChannelModel train(const ClassifierSpec& spec, Channel channel, const Dataset& train_set, const TrainConfig& cfg);

/// Fraction of scenes whose predicted class equals the label.
double accuracy(const Classifier& model, const Dataset& dataset, Channel channel);

/// Binary model file: "ADVS", u32 version, u32 channel, 8×u32 spec extents,
/// binary64 scaling mean and stddev, u64 parameter count, then the
/// parameters. All integers and floats little-endian.
void save_model(const ChannelModel& model, const std::filesystem::path& path);
ChannelModel load_model(const std::filesystem::path& path);

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::size_t kModelHeaderBytes = 4 + 4 + 4 + 8 * 4 + 2 * 8 + 8;

}  // namespace advs
