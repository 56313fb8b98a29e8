#include "advs/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "advs/image_io.hpp"

namespace advs {

namespace fs = std::filesystem;

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Visible: return "Visible";
    case Channel::Gray: return "Gray";
    case Channel::IR: return "IR";
    case Channel::Red: return "Red";
    case Channel::Green: return "Green";
    case Channel::Blue: return "Blue";
  }
  return "?";
}

Channel parse_channel(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (lower == "visible" || lower == "vis") return Channel::Visible;
  if (lower == "gray" || lower == "grey") return Channel::Gray;
  if (lower == "ir") return Channel::IR;
  if (lower == "red") return Channel::Red;
  if (lower == "green") return Channel::Green;
  if (lower == "blue") return Channel::Blue;
  throw InvalidArgument("unknown channel '" + std::string(name) +
                        "' (expected Visible, Gray, IR, Red, Green or Blue)");
}

void Dataset::validate() const {
  std::set<std::string> ids;
  for (const Scene& s : scenes) {
    if (!ids.insert(s.id).second) throw InvalidArgument("duplicate scene id " + s.id);
    if (s.label < 0 || s.label >= num_classes()) {
      throw InvalidArgument("scene " + s.id + ": label " + std::to_string(s.label) + " outside [0, " +
                            std::to_string(num_classes()) + ")");
    }
    if (s.visible.rank() != 3 || s.visible.dim(0) != 3 || s.ir.rank() != 3 || s.ir.dim(0) != 1 ||
        s.visible.dim(1) != s.ir.dim(1) || s.visible.dim(2) != s.ir.dim(2)) {
      throw InvalidArgument("scene " + s.id + ": visible " + shape_string(s.visible.shape()) + " and IR " +
                            shape_string(s.ir.shape()) + " are not registered");
    }
    if ((s.visible.data() < 0).any() || (s.visible.data() > 1).any() || (s.ir.data() < 0).any() ||
        (s.ir.data() > 1).any()) {
      throw InvalidArgument("scene " + s.id + ": pixel values outside [0,1]");
    }
  }
}

void SynthConfig::validate() const {
  if (num_classes < 2 || num_classes > 9) throw InvalidArgument("num_classes must be in [2, 9]");
  if (image_size < 16 || image_size % 2 != 0) throw InvalidArgument("image_size must be even and at least 16");
  if (samples < num_classes) throw InvalidArgument("samples must be at least num_classes");
  if (!(channel_correlation >= 0 && channel_correlation <= 1)) throw InvalidArgument("channel_correlation must be in [0,1]");
  if (!(noise_level >= 0 && noise_level <= 1)) throw InvalidArgument("noise_level must be in [0,1]");
  if (!(contrast > 0 && contrast <= 0.4)) throw InvalidArgument("contrast must be in (0, 0.4]");
}

Tensor decompose(const Scene& scene, Channel channel) {
  const Index h = scene.visible.dim(1), w = scene.visible.dim(2), n = h * w;
  if (channel == Channel::Visible) return Tensor(scene.visible.shape(), scene.visible.data());

  Eigen::ArrayXd plane;
  const auto& vis = scene.visible.data();
  switch (channel) {
    case Channel::Red: plane = vis.segment(0, n); break;
    case Channel::Green: plane = vis.segment(n, n); break;
    case Channel::Blue: plane = vis.segment(2 * n, n); break;
    case Channel::Gray:
      plane = kLumaRed * vis.segment(0, n) + kLumaGreen * vis.segment(n, n) + kLumaBlue * vis.segment(2 * n, n);
      plane = plane.min(1.0).max(0.0);
      break;
    case Channel::IR: plane = scene.ir.data(); break;
    case Channel::Visible: break;
  }
  Tensor out(Shape{3, h, w});
  for (Index c = 0; c < 3; ++c) out.data().segment(c * n, n) = plane;
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

Dataset load_dataset(const fs::path& directory) {
  const fs::path labels_path = directory / "labels.csv";
  std::ifstream labels(labels_path);
  if (!labels) throw IoError("cannot open " + labels_path.string());

  std::vector<std::pair<std::string, int>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(labels, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line_no == 1 && line == "id,label") continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError(labels_path.string() + ":" + std::to_string(line_no) + ": expected id,label");
    const std::string id = trim(line.substr(0, comma));
    const std::string lab = trim(line.substr(comma + 1));
    if (id.empty()) throw FormatError(labels_path.string() + ":" + std::to_string(line_no) + ": empty id");
    int label = 0;
    try {
      std::size_t used = 0;
      label = std::stoi(lab, &used);
      if (used != lab.size()) throw std::invalid_argument(lab);
    } catch (const std::exception&) {
      throw FormatError("scene " + id + ": malformed label '" + lab + "'");
    }
    if (label < 0) throw InvalidArgument("scene " + id + ": label " + lab + " out of range");
    rows.emplace_back(id, label);
  }

  Dataset ds;
  const fs::path classes_path = directory / "classes.txt";
  if (fs::exists(classes_path)) {
    std::ifstream classes(classes_path);
    while (std::getline(classes, line)) {
      line = trim(line);
      if (!line.empty()) ds.class_names.push_back(line);
    }
  } else {
    int top = -1;
    for (const auto& [id, label] : rows) top = std::max(top, label);
    for (int c = 0; c <= top; ++c) ds.class_names.push_back("class" + std::to_string(c));
  }

  std::sort(rows.begin(), rows.end());
  for (const auto& [id, label] : rows) {
    if (label >= ds.num_classes()) {
      throw InvalidArgument("scene " + id + ": label " + std::to_string(label) + " out of range for " +
                            std::to_string(ds.num_classes()) + " classes");
    }
    Scene s;
    s.id = id;
    s.label = label;
    try {
      s.visible = read_ppm(directory / (id + "_vis.ppm"));
      s.ir = read_pgm(directory / (id + "_ir.pgm"));
    } catch (const Error& e) {
      throw FormatError("scene " + id + ": " + e.what());
    }
    ds.scenes.push_back(std::move(s));
  }
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& dataset, const fs::path& directory) {
  dataset.validate();
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());
  std::ofstream labels(directory / "labels.csv", std::ios::trunc);
  std::ofstream classes(directory / "classes.txt", std::ios::trunc);
  if (!labels || !classes) throw IoError("cannot write dataset index under " + directory.string());
  labels << "id,label\n";
  for (const Scene& s : dataset.scenes) {
    labels << s.id << ',' << s.label << '\n';
    write_ppm(directory / (s.id + "_vis.ppm"), s.visible);
    write_pgm(directory / (s.id + "_ir.pgm"), s.ir);
  }
  for (const auto& name : dataset.class_names) classes << name << '\n';
}

namespace {

enum class Silhouette { Disk, Square, Cross, Bar };

bool inside(Silhouette shape, double dx, double dy, double half) {
  const double ax = std::abs(dx), ay = std::abs(dy);
  switch (shape) {
    case Silhouette::Disk: return dx * dx + dy * dy <= half * half;
    case Silhouette::Square: return std::max(ax, ay) <= 0.8 * half;
    case Silhouette::Cross: return (ax <= half / 3 && ay <= half) || (ay <= half / 3 && ax <= half);
    case Silhouette::Bar: return ax <= half && ay <= half / 4;
  }
  return false;
}

// Per-plane offset of each class colour from the background, in units of
// `contrast`. Classes sharing a silhouette (c and c+4) differ in every
// plane so that any single-band rendering still separates them.
std::array<double, 3> class_tint(int label) {
  static constexpr double kLevels[3] = {1.0, 0.55, -0.8};
  static constexpr double kPattern[4][3] = {{0.15, -0.15, -0.15}, {-0.15, 0.15, -0.15}, {-0.15, -0.15, 0.15}, {0.15, 0.15, -0.15}};
  const double level = kLevels[(label / 4) % 3];
  std::array<double, 3> tint{};
  for (int p = 0; p < 3; ++p) tint[p] = level + kPattern[label % 4][p];
  return tint;
}

double on_grid(double v) { return quantize(v) / 255.0; }

constexpr double kVisibleBackground = 0.5;
constexpr double kInfraredBackground = 0.3;

}  // namespace

Dataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&] { return cfg.noise_level * (2 * unit(rng) - 1); };

  const Index size = cfg.image_size, n = size * size;
  const double rho = cfg.channel_correlation;
  Dataset ds;
  for (int c = 0; c < cfg.num_classes; ++c) ds.class_names.push_back("class" + std::to_string(c));

  for (int i = 0; i < cfg.samples; ++i) {
    Scene s;
    char id[16];
    std::snprintf(id, sizeof id, "s%05d", i);
    s.id = id;
    s.label = i % cfg.num_classes;
    s.visible = Tensor(Shape{3, size, size});
    s.ir = Tensor(Shape{1, size, size});

    const double half = size * (0.12 + 0.08 * unit(rng));
    const double span = size - 2 * half - 3;
    const double cx = half + 1.5 + span * unit(rng);
    const double cy = half + 1.5 + span * unit(rng);
    const auto shape = static_cast<Silhouette>(s.label % 4);
    const auto tint = class_tint(s.label);
    // The heat signature is a disk whose intensity, not outline, encodes the class.
    const double amplitude = cfg.contrast * (s.label + 1) / cfg.num_classes;

    for (Index y = 0; y < size; ++y) {
      for (Index x = 0; x < size; ++x) {
        const Index p = y * size + x;
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const bool hit = inside(shape, dx, dy, half);
        double luma = 0;
        for (Index c = 0; c < 3; ++c) {
          const double offset = hit ? cfg.contrast * tint[static_cast<std::size_t>(c)] : 0.0;
          const double v = on_grid(kVisibleBackground + offset + jitter());
          s.visible[c * n + p] = v;
          luma += (c == 0 ? kLumaRed : c == 1 ? kLumaGreen : kLumaBlue) * v;
        }
        const double signature = 0.85 + 0.15 * unit(rng);
        const double background = kInfraredBackground + jitter();
        const bool warm = inside(Silhouette::Disk, dx, dy, half);
        // Visible luminance in contrast units, so both texture terms share a scale.
        const double mimic = cfg.contrast > 0 ? (luma - kVisibleBackground) / cfg.contrast : 0.0;
        s.ir[p] = on_grid(warm ? background + amplitude * ((1 - rho) * signature + rho * mimic) : background);
      }
    }
    ds.scenes.push_back(std::move(s));
  }
  return ds;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0 && test_fraction < 1)) {
    throw InvalidArgument("test_fraction must lie strictly between 0 and 1, got " + std::to_string(test_fraction));
  }
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dataset.size(); ++i) by_class[dataset.scenes[i].label].push_back(i);

  const auto total_test = static_cast<std::size_t>(std::llround(dataset.size() * test_fraction));
  struct Share {
    int label;
    std::size_t count;
    double remainder;
  };
  std::vector<Share> shares;
  std::size_t assigned = 0;
  for (const auto& [label, members] : by_class) {
    const double exact = members.size() * test_fraction;
    const auto base = static_cast<std::size_t>(std::floor(exact));
    shares.push_back({label, base, exact - base});
    assigned += base;
  }
  std::vector<std::size_t> order(shares.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return shares[a].remainder > shares[b].remainder; });
  for (std::size_t k = 0; assigned < total_test && k < order.size(); ++k, ++assigned) shares[order[k]].count++;

  std::mt19937_64 rng(seed);
  std::vector<bool> is_test(dataset.size(), false);
  for (const Share& share : shares) {
    auto members = by_class[share.label];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t k = 0; k < share.count && k < members.size(); ++k) is_test[members[k]] = true;
  }

  Dataset train, test;
  train.class_names = test.class_names = dataset.class_names;
  train.split = SplitTag::Train;
  test.split = SplitTag::Test;
  for (std::size_t i = 0; i < dataset.size(); ++i) (is_test[i] ? test : train).scenes.push_back(dataset.scenes[i]);
  return {std::move(train), std::move(test)};
}

Dataset head(const Dataset& dataset, std::size_t count) {
  Dataset out;
  out.class_names = dataset.class_names;
  out.split = dataset.split;
  const std::size_t n = std::min(count, dataset.size());
  out.scenes.assign(dataset.scenes.begin(), dataset.scenes.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

}  // namespace advs
