#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "advs/dataset.hpp"
#include "advs/image_io.hpp"
#include "scratch.hpp"

using namespace advs;
namespace fs = std::filesystem;

namespace {

Scene one_pixel(double r, double g, double b) {
  Scene s;
  s.id = "p";
  s.visible = Tensor({3, 1, 1}, {r, g, b});
  s.ir = Tensor({1, 1, 1}, {0.25});
  return s;
}

void write_bytes(const fs::path& p, const std::string& bytes) {
  std::ofstream f(p, std::ios::binary);
  f << bytes;
}

// Pearson correlation of within-scene-centred samples pooled over scenes.
double pooled_correlation(const std::vector<std::vector<std::pair<double, double>>>& scenes) {
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& pts : scenes) {
    if (pts.size() < 2) continue;
    double mx = 0, my = 0;
    for (auto [x, y] : pts) mx += x, my += y;
    mx /= pts.size();
    my /= pts.size();
    for (auto [x, y] : pts) {
      sxy += (x - mx) * (y - my);
      sxx += (x - mx) * (x - mx);
      syy += (y - my) * (y - my);
    }
  }
  return sxy / std::sqrt(sxx * syy);
}

// Blob pixels found from the images alone: IR clearly above its background
// and visible luminance clearly off the mid-grey background.
double blob_correlation(double rho) {
  SynthConfig cfg;
  cfg.samples = 100;
  cfg.contrast = 0.4;
  cfg.channel_correlation = rho;
  cfg.seed = 5;
  const Dataset ds = generate_synthetic(cfg);
  std::vector<std::vector<std::pair<double, double>>> pooled;
  for (const Scene& s : ds.scenes) {
    const Tensor gray = decompose(s, Channel::Gray);
    const Index n = s.ir.size();
    std::vector<std::pair<double, double>> pts;
    for (Index p = 0; p < n; ++p) {
      const double luma = gray[p];
      if (s.ir[p] > 0.33 && std::abs(luma - 0.5) > 0.05) pts.emplace_back(s.ir[p], luma);
    }
    pooled.push_back(std::move(pts));
  }
  return pooled_correlation(pooled);
}

}  // namespace

TEST_CASE("channel names round-trip and there are six") {
  CHECK(kChannels.size() == 6);
  for (Channel c : kChannels) CHECK(parse_channel(channel_name(c)) == c);
  CHECK(parse_channel("vis") == Channel::Visible);
  CHECK(parse_channel("grey") == Channel::Gray);
  CHECK_THROWS_AS(parse_channel("uv"), InvalidArgument);
}

TEST_CASE("decompose pixel examples") {
  const Scene red = one_pixel(1, 0, 0);
  CHECK(decompose(red, Channel::Red)[0] == 1.0);
  CHECK(decompose(red, Channel::Green)[0] == 0.0);
  CHECK(decompose(red, Channel::Gray)[0] == doctest::Approx(0.299).epsilon(1e-15));
  CHECK(decompose(one_pixel(1, 1, 1), Channel::Gray)[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(decompose(one_pixel(0, 1, 0), Channel::Gray)[0] == doctest::Approx(0.587).epsilon(1e-15));
  CHECK(decompose(red, Channel::IR)[0] == 0.25);
  CHECK(decompose(red, Channel::Visible) == red.visible);
}

TEST_CASE("decompose invariants over synthetic scenes") {
  SynthConfig cfg;
  cfg.samples = 24;
  cfg.seed = 2;
  const Dataset ds = generate_synthetic(cfg);
  for (const Scene& s : ds.scenes) {
    const Tensor vis = decompose(s, Channel::Visible);
    const Index n = s.ir.size();
    for (Channel c : kChannels) {
      const Tensor out = decompose(s, c);
      CHECK(out.shape() == vis.shape());
      CHECK((out.data() >= 0).all());
      CHECK((out.data() <= 1).all());
      if (c != Channel::Visible) {
        CHECK((out.data().segment(0, n) == out.data().segment(n, n)).all());
        CHECK((out.data().segment(0, n) == out.data().segment(2 * n, n)).all());
      }
    }
    const Tensor gray = decompose(s, Channel::Gray);
    for (Index p = 0; p < n; ++p) {
      const double want = 0.299 * vis[p] + 0.587 * vis[n + p] + 0.114 * vis[2 * n + p];
      CHECK(std::abs(gray[p] - want) <= 1e-12);
    }
  }
}

TEST_CASE("synthetic generation") {
  SynthConfig cfg;
  cfg.num_classes = 4;
  cfg.samples = 4;
  cfg.seed = 99;
  const Dataset ds = generate_synthetic(cfg);
  REQUIRE(ds.size() == 4);
  std::set<int> labels;
  for (const Scene& s : ds.scenes) labels.insert(s.label);
  CHECK(labels == std::set<int>{0, 1, 2, 3});

  SynthConfig big;
  big.samples = 40;
  big.seed = 3;
  const Dataset a = generate_synthetic(big), b = generate_synthetic(big);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.scenes[i].id == b.scenes[i].id);
    CHECK(a.scenes[i].visible == b.scenes[i].visible);
    CHECK(a.scenes[i].ir == b.scenes[i].ir);
  }
  big.seed = 4;
  CHECK_FALSE(generate_synthetic(big).scenes[0].visible == a.scenes[0].visible);

  SUBCASE("invalid configurations") {
    SynthConfig bad;
    bad.image_size = 15;
    CHECK_THROWS_AS(generate_synthetic(bad), InvalidArgument);
    bad = {};
    bad.image_size = 14;
    CHECK_THROWS_AS(generate_synthetic(bad), InvalidArgument);
    bad = {};
    bad.samples = 3;
    CHECK_THROWS_AS(generate_synthetic(bad), InvalidArgument);
    bad = {};
    bad.channel_correlation = 1.5;
    CHECK_THROWS_AS(generate_synthetic(bad), InvalidArgument);
  }
}

TEST_CASE("rho controls IR/visible texture correlation") {
  const double independent = blob_correlation(0.0);
  const double mimicking = blob_correlation(1.0);
  CHECK(std::abs(independent) < 0.2);
  CHECK(mimicking > independent);
}

TEST_CASE("load_dataset layouts and errors") {
  Scratch dir("load");

  SUBCASE("empty labels file") {
    write_bytes(dir / "labels.csv", "");
    const Dataset ds = load_dataset(dir.path());
    CHECK(ds.empty());
  }
  SUBCASE("one all-zero scene") {
    write_bytes(dir / "labels.csv", "id,label\nz,0\n");
    write_ppm(dir / "z_vis.ppm", Tensor::zeros({3, 2, 2}));
    write_pgm(dir / "z_ir.pgm", Tensor::zeros({1, 2, 2}));
    const Dataset ds = load_dataset(dir.path());
    REQUIRE(ds.size() == 1);
    CHECK(ds.scenes[0].visible == Tensor::zeros({3, 2, 2}));
    CHECK(ds.scenes[0].ir == Tensor::zeros({1, 2, 2}));
  }
  SUBCASE("round trip is bit-identical and ordered by id") {
    SynthConfig cfg;
    cfg.samples = 12;
    cfg.seed = 8;
    Dataset ds = generate_synthetic(cfg);
    std::reverse(ds.scenes.begin(), ds.scenes.end());
    save_dataset(ds, dir.path());
    const Dataset back = load_dataset(dir.path());
    REQUIRE(back.size() == ds.size());
    CHECK(back.class_names == ds.class_names);
    for (std::size_t i = 0; i < back.size(); ++i) {
      const Scene& want = ds.scenes[ds.size() - 1 - i];
      CHECK(back.scenes[i].id == want.id);
      CHECK(back.scenes[i].label == want.label);
      CHECK((back.scenes[i].visible.data() == want.visible.data()).all());
      CHECK((back.scenes[i].ir.data() == want.ir.data()).all());
    }
  }
  SUBCASE("missing image names the scene") {
    write_bytes(dir / "labels.csv", "id,label\nlost,0\n");
    try {
      load_dataset(dir.path());
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("lost") != std::string::npos);
    }
  }
  SUBCASE("malformed header names the scene") {
    write_bytes(dir / "labels.csv", "bad,0\n");
    write_bytes(dir / "bad_vis.ppm", "P3\n1 1\n255\n0 0 0\n");
    write_pgm(dir / "bad_ir.pgm", Tensor::zeros({1, 1, 1}));
    try {
      load_dataset(dir.path());
      FAIL("expected an error");
    } catch (const FormatError& e) {
      CHECK(std::string(e.what()).find("bad") != std::string::npos);
    }
  }
  SUBCASE("label out of range names the scene") {
    write_bytes(dir / "labels.csv", "id,label\nhigh,7\n");
    write_bytes(dir / "classes.txt", "a\nb\n");
    write_ppm(dir / "high_vis.ppm", Tensor::zeros({3, 1, 1}));
    write_pgm(dir / "high_ir.pgm", Tensor::zeros({1, 1, 1}));
    try {
      load_dataset(dir.path());
      FAIL("expected an error");
    } catch (const InvalidArgument& e) {
      CHECK(std::string(e.what()).find("high") != std::string::npos);
    }
  }
  SUBCASE("unregistered IR is rejected") {
    write_bytes(dir / "labels.csv", "id,label\nm,0\n");
    write_ppm(dir / "m_vis.ppm", Tensor::zeros({3, 2, 2}));
    write_pgm(dir / "m_ir.pgm", Tensor::zeros({1, 3, 2}));
    CHECK_THROWS_AS(load_dataset(dir.path()), InvalidArgument);
  }
}

TEST_CASE("pixmap codec") {
  Scratch dir("pnm");
  SUBCASE("header comments and truncation") {
    write_bytes(dir / "c.pgm", std::string("P5\n# note\n2 1\n255\n") + char(0) + char(255));
    const Tensor t = read_pgm(dir / "c.pgm");
    CHECK(t == Tensor({1, 1, 2}, {0.0, 1.0}));
    write_bytes(dir / "t.pgm", std::string("P5\n2 2\n255\n") + char(1));
    CHECK_THROWS_AS(read_pgm(dir / "t.pgm"), FormatError);
    write_bytes(dir / "m.pgm", std::string("P5\n1 1\n65535\n") + char(1) + char(1));
    CHECK_THROWS_AS(read_pgm(dir / "m.pgm"), FormatError);
  }
  SUBCASE("quantization") {
    CHECK(quantize(0.5) == 128);
    CHECK(quantize(-1) == 0);
    CHECK(quantize(2) == 255);
    for (int v = 0; v < 256; ++v) CHECK(quantize(v / 255.0) == v);
  }
}

TEST_CASE("stratified split") {
  SynthConfig cfg;
  cfg.samples = 100;
  const Dataset ds = generate_synthetic(cfg);
  const auto [train, test] = split(ds, 0.25, 1);
  CHECK(train.size() == 75);
  CHECK(test.size() == 25);
  CHECK(train.split == SplitTag::Train);
  CHECK(test.split == SplitTag::Test);

  std::set<std::string> a, b, all;
  for (const Scene& s : train.scenes) a.insert(s.id);
  for (const Scene& s : test.scenes) b.insert(s.id);
  for (const Scene& s : ds.scenes) all.insert(s.id);
  std::set<std::string> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(both, both.begin()));
  CHECK(both.empty());
  a.insert(b.begin(), b.end());
  CHECK(a == all);

  const auto again = split(ds, 0.25, 1);
  for (std::size_t i = 0; i < test.size(); ++i) CHECK(again.second.scenes[i].id == test.scenes[i].id);

  SUBCASE("per-class counts within one of the exact share") {
    SynthConfig odd;
    odd.samples = 103;
    odd.num_classes = 5;
    const Dataset d = generate_synthetic(odd);
    for (double f : {0.1, 0.2, 0.33, 0.5, 0.9}) {
      const auto parts = split(d, f, 7);
      std::vector<int> total(5, 0), held(5, 0);
      for (const Scene& s : d.scenes) ++total[s.label];
      for (const Scene& s : parts.second.scenes) ++held[s.label];
      for (int c = 0; c < 5; ++c) CHECK(std::abs(held[c] - total[c] * f) <= 1.0);
      CHECK(parts.first.size() + parts.second.size() == d.size());
    }
  }
  CHECK_THROWS_AS(split(ds, 0.0, 1), InvalidArgument);
  CHECK_THROWS_AS(split(ds, 1.0, 1), InvalidArgument);
}
