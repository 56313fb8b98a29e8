#include "advs/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "advs/parallel.hpp"

namespace advs {

void ClassifierSpec::validate() const {
  if (input_channels < 1 || conv1_filters < 1 || conv2_filters < 1 || hidden < 1) {
    throw InvalidArgument("classifier extents must be positive");
  }
  if (num_classes < 2) throw InvalidArgument("classifier needs at least two classes");
  if (conv1_kernel < 1 || conv2_kernel < 1) throw InvalidArgument("kernel sizes must be positive");
  const Index c1 = input_size - conv1_kernel + 1;
  if (c1 < 2 || c1 % 2 != 0) {
    throw InvalidArgument("input " + std::to_string(input_size) + " with kernel " + std::to_string(conv1_kernel) +
                          " leaves " + std::to_string(c1) + ", which maxpool2 cannot halve");
  }
  const Index c2 = c1 / 2 - conv2_kernel + 1;
  if (c2 < 2 || c2 % 2 != 0) {
    throw InvalidArgument("second stage extent " + std::to_string(c2) + " is not a positive even size");
  }
}

Index ClassifierSpec::feature_size() const {
  return ((input_size - conv1_kernel + 1) / 2 - conv2_kernel + 1) / 2;
}

std::vector<Shape> ClassifierSpec::layer_shapes() const {
  return {
      {conv1_filters, input_channels, conv1_kernel, conv1_kernel},
      {conv1_filters},
      {conv2_filters, conv1_filters, conv2_kernel, conv2_kernel},
      {conv2_filters},
      {flat_features(), hidden},
      {hidden},
      {hidden, num_classes},
      {num_classes},
  };
}

Index ClassifierSpec::parameter_count() const {
  Index total = 0;
  for (const auto& s : layer_shapes()) total += shape_size(s);
  return total;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("epochs must be at least 1");
  if (batch_size < 1) throw InvalidArgument("batch_size must be at least 1");
  if (!(learning_rate > 0)) throw InvalidArgument("learning_rate must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw InvalidArgument("momentum must be in [0,1)");
}

Eigen::VectorXd init_params(const ClassifierSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Eigen::VectorXd params(spec.parameter_count());
  Index offset = 0;
  for (const Shape& shape : spec.layer_shapes()) {
    const Index count = shape_size(shape);
    if (shape.size() == 1) {
      params.segment(offset, count).setZero();
    } else {
      // conv: fan_in = C_in·k·k, fan_out = C_out·k·k; dense: n, m
      const Index receptive = shape.size() == 4 ? shape[2] * shape[3] : 1;
      const double fan_in = static_cast<double>(shape.size() == 4 ? shape[1] * receptive : shape[0]);
      const double fan_out = static_cast<double>(shape.size() == 4 ? shape[0] * receptive : shape[1]);
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> u(-limit, limit);
      for (Index i = 0; i < count; ++i) params[offset + i] = u(rng);
    }
    offset += count;
  }
  return params;
}

Var64 classifier_forward(const ClassifierSpec& spec, Var64 input, std::span<const Var64> p) {
  if (p.size() != 8) throw InvalidArgument("classifier expects 8 parameter tensors");
  if (input.shape() != spec.input_shape()) {
    throw ShapeError("input shape " + shape_string(input.shape()) + " does not match classifier input " +
                     shape_string(spec.input_shape()));
  }
  auto h = maxpool2(relu(add_bias(conv2d(input, p[0], 1), p[1])));
  h = maxpool2(relu(add_bias(conv2d(h, p[2], 1), p[3])));
  auto hidden = relu(dense(flatten(h), p[4], p[5]));
  return dense(hidden, p[6], p[7]);
}

InputScaling InputScaling::fit(const std::vector<Tensor>& inputs) {
  double sum = 0, sq = 0, count = 0;
  for (const Tensor& t : inputs) {
    sum += t.data().sum();
    sq += t.data().square().sum();
    count += static_cast<double>(t.size());
  }
  if (count == 0) return {};
  const double mean = sum / count;
  const double var = std::max(0.0, sq / count - mean * mean);
  // A flat channel carries no signal; keep the scale finite.
  return {mean, var > 1e-12 ? std::sqrt(var) : 1.0};
}

ChannelModel::ChannelModel(Channel channel, ClassifierSpec spec, const Eigen::VectorXd& parameters,
                           InputScaling scaling)
    : channel_(channel), spec_(spec), scaling_(scaling) {
  spec_.validate();
  if (!(scaling_.stddev > 0) || !std::isfinite(scaling_.stddev) || !std::isfinite(scaling_.mean)) {
    throw InvalidArgument("input scaling needs a finite mean and positive stddev");
  }
  if (parameters.size() != spec_.parameter_count()) {
    throw InvalidArgument("parameter vector has " + std::to_string(parameters.size()) + " values, spec needs " +
                          std::to_string(spec_.parameter_count()));
  }
  Index offset = 0;
  for (const Shape& shape : spec_.layer_shapes()) {
    const Index count = shape_size(shape);
    layers_.emplace_back(shape, parameters.segment(offset, count).array());
    offset += count;
  }
}

Eigen::VectorXd ChannelModel::parameters() const {
  Eigen::VectorXd flat(spec_.parameter_count());
  Index offset = 0;
  for (const Tensor& t : layers_) {
    flat.segment(offset, t.size()) = t.data().matrix();
    offset += t.size();
  }
  return flat;
}

Var64 ChannelModel::forward(Graph64& graph, Var64 input) const {
  std::vector<Var64> handles;
  handles.reserve(layers_.size());
  for (const Tensor& t : layers_) handles.push_back(graph.constant_ref(t));
  const double k = 1 / scaling_.stddev;
  return classifier_forward(spec_, affine(input, k, -scaling_.mean * k), handles);
}

ChannelModel train(const ClassifierSpec& spec, Channel channel, const Dataset& train_set, const TrainConfig& cfg) {
  spec.validate();
  cfg.validate();
  if (train_set.empty()) throw InvalidArgument("cannot train on an empty dataset");
  for (const Scene& s : train_set.scenes) {
    if (s.label < 0 || s.label >= spec.num_classes) {
      throw InvalidArgument("scene " + s.id + ": label " + std::to_string(s.label) + " exceeds classifier outputs");
    }
  }

  std::vector<Tensor> inputs;
  inputs.reserve(train_set.size());
  for (const Scene& s : train_set.scenes) {
    inputs.push_back(decompose(s, channel));
    if (inputs.back().shape() != spec.input_shape()) {
      throw ShapeError("scene " + s.id + " renders as " + shape_string(inputs.back().shape()) +
                       ", classifier expects " + shape_string(spec.input_shape()));
    }
  }

  const InputScaling scaling = InputScaling::fit(inputs);
  for (Tensor& t : inputs) t.data() = (t.data() - scaling.mean) / scaling.stddev;

  const auto shapes = spec.layer_shapes();
  Eigen::VectorXd params = init_params(spec, cfg.seed);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(params.size());
  std::vector<std::size_t> order(train_set.size());
  std::vector<EpochStats> history;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::seed_seq epoch_seed{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                             static_cast<std::uint32_t>(epoch)};
    std::mt19937_64 rng(epoch_seed);
    std::shuffle(order.begin(), order.end(), rng);

    double loss_total = 0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      Graph64 g;
      std::vector<Var64> handles;
      Index offset = 0;
      for (const Shape& shape : shapes) {
        const Index count = shape_size(shape);
        handles.push_back(g.variable(Tensor(shape, params.segment(offset, count).array())));
        offset += count;
      }
      std::vector<Var64> losses;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t i = order[k];
        auto out = classifier_forward(spec, g.constant_ref(inputs[i]), handles);
        if (argmax(out.value().data().matrix()) == train_set.scenes[i].label) ++correct;
        losses.push_back(softmax_cross_entropy(out, train_set.scenes[i].label));
        loss_total += losses.back().value()[0];
      }
      g.backward(mean(losses));
      offset = 0;
      for (std::size_t l = 0; l < handles.size(); ++l) {
        const Index count = shape_size(shapes[l]);
        velocity.segment(offset, count) =
            cfg.momentum * velocity.segment(offset, count) - cfg.learning_rate * g.gradient(handles[l]).data().matrix();
        offset += count;
      }
      params += velocity;
    }
    history.push_back({loss_total / static_cast<double>(order.size()),
                       static_cast<double>(correct) / static_cast<double>(order.size())});
  }

  ChannelModel model(channel, spec, params, scaling);
  model.history = std::move(history);
  return model;
}

double accuracy(const Classifier& model, const Dataset& dataset, Channel channel) {
  if (dataset.empty()) throw InvalidArgument("accuracy of an empty dataset is undefined");
  std::vector<char> hit(dataset.size(), 0);
  parallel_for(dataset.size(), [&](std::size_t i) {
    const Scene& s = dataset.scenes[i];
    hit[i] = predicted_class(model, decompose(s, channel)) == s.label;
  });
  const auto correct = std::count(hit.begin(), hit.end(), 1);
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
}

class Reader {
 public:
  Reader(const std::string& bytes, const std::filesystem::path& path) : bytes_(bytes), path_(path) {}

  std::uint64_t take(int width, const char* what) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw FormatError(path_.string() + ": truncated while reading " + what + " at offset " + std::to_string(pos_));
    }
    std::uint64_t v = 0;
    for (int b = 0; b < width; ++b) v |= std::uint64_t(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    pos_ += static_cast<std::size_t>(width);
    return v;
  }
  std::size_t offset() const { return pos_; }

 private:
  const std::string& bytes_;
  const std::filesystem::path& path_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const ChannelModel& model, const std::filesystem::path& path) {
  const ClassifierSpec& s = model.spec();
  std::string out = "ADVS";
  put_u32(out, kModelFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(channel_index(model.channel())));
  for (Index v : {s.input_channels, s.input_size, s.conv1_filters, s.conv1_kernel, s.conv2_filters, s.conv2_kernel,
                  s.hidden, s.num_classes}) {
    put_u32(out, static_cast<std::uint32_t>(v));
  }
  put_u64(out, std::bit_cast<std::uint64_t>(model.scaling().mean));
  put_u64(out, std::bit_cast<std::uint64_t>(model.scaling().stddev));
  const Eigen::VectorXd params = model.parameters();
  put_u64(out, static_cast<std::uint64_t>(params.size()));
  for (Index i = 0; i < params.size(); ++i) put_u64(out, std::bit_cast<std::uint64_t>(params[i]));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot write " + path.string());
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw IoError("short write to " + path.string());
}

ChannelModel load_model(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw IoError("cannot open " + path.string() + ": not a regular file");
  std::ifstream file(path, std::ios::binary);
  if (!file) throw IoError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4 || bytes.compare(0, 4, "ADVS") != 0) {
    throw FormatError(path.string() + ": bad magic at offset 0");
  }
  Reader r(bytes, path);
  r.take(4, "magic");
  const auto version = r.take(4, "version");
  if (version != kModelFormatVersion) {
    throw FormatError(path.string() + ": unsupported version " + std::to_string(version) + " at offset 4");
  }
  const auto tag = r.take(4, "channel");
  if (tag >= kChannels.size()) throw FormatError(path.string() + ": bad channel tag at offset 8");
  ClassifierSpec spec;
  for (Index* field : {&spec.input_channels, &spec.input_size, &spec.conv1_filters, &spec.conv1_kernel,
                       &spec.conv2_filters, &spec.conv2_kernel, &spec.hidden, &spec.num_classes}) {
    *field = static_cast<Index>(r.take(4, "spec extent"));
  }
  try {
    spec.validate();
  } catch (const InvalidArgument& e) {
    throw FormatError(path.string() + ": invalid classifier spec at offset 12: " + e.what());
  }
  InputScaling scaling;
  scaling.mean = std::bit_cast<double>(r.take(8, "scaling"));
  scaling.stddev = std::bit_cast<double>(r.take(8, "scaling"));
  if (!(scaling.stddev > 0) || !std::isfinite(scaling.stddev) || !std::isfinite(scaling.mean)) {
    throw FormatError(path.string() + ": invalid input scaling at offset 44");
  }
  const std::size_t count_at = r.offset();
  const auto count = r.take(8, "parameter count");
  if (count != static_cast<std::uint64_t>(spec.parameter_count())) {
    throw FormatError(path.string() + ": parameter count " + std::to_string(count) + " at offset " +
                      std::to_string(count_at) + " does not match spec (" + std::to_string(spec.parameter_count()) + ")");
  }
  Eigen::VectorXd params(static_cast<Index>(count));
  for (Index i = 0; i < params.size(); ++i) params[i] = std::bit_cast<double>(r.take(8, "parameters"));
  if (r.offset() != bytes.size()) {
    throw FormatError(path.string() + ": trailing bytes after offset " + std::to_string(r.offset()));
  }
  return ChannelModel(kChannels[tag], spec, params, scaling);
}

}  // namespace advs
