#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "maskinject/config.hpp"
#include "maskinject/io.hpp"
#include "maskinject/random.hpp"
#include "maskinject/render.hpp"

using namespace maskinject;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("maskinject_io_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  void write_raw(const std::string& name, const std::string& bytes) const {
    std::ofstream(path(name), std::ios::binary) << bytes;
  }
  fs::path dir_;
};

std::string read_all(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

using Io = TempDir;

TEST_F(Io, MaskRoundTrip) {
  Rng rng(1);
  BinaryMask m(13, 7);
  for (std::size_t i = 0; i < m.size(); ++i) m.set_index(i, rng.uniform() < 0.5);
  io::write_mask(path("m.pgm"), m);
  EXPECT_EQ(io::read_mask(path("m.pgm")), m);
}

TEST_F(Io, LabelRoundTripAndLimit) {
  LabelMap lm(4, 2, {0, 1, 2, 255, 7, 7, 0, 3});
  io::write_labels(path("l.pgm"), lm);
  EXPECT_EQ(io::read_labels(path("l.pgm")), lm);
  LabelMap big(1, 1, {256});
  EXPECT_THROW(io::write_labels(path("big.pgm"), big), Error);
}

TEST_F(Io, PgmHeaderWithComments) {
  write_raw("c.pgm", std::string("P5\n# comment\n2 1\n# another\n255\n") + char(0) + char(200));
  const auto g = io::read_pgm(path("c.pgm"));
  EXPECT_EQ(g.width, 2);
  EXPECT_EQ(g.pixels[1], 200);
  EXPECT_TRUE(io::mask_from_gray(g).get(1, 0));
  EXPECT_FALSE(io::mask_from_gray(g).get(0, 0));
}

TEST_F(Io, PgmErrors) {
  EXPECT_THROW(io::read_pgm(path("missing.pgm")), Error);
  write_raw("p2.pgm", "P2\n1 1\n255\n0\n");
  EXPECT_THROW(io::read_pgm(path("p2.pgm")), Error);
  write_raw("short.pgm", "P5\n4 4\n255\nab");
  EXPECT_THROW(io::read_pgm(path("short.pgm")), Error);
  write_raw("deep.pgm", "P5\n1 1\n65535\nab");
  EXPECT_THROW(io::read_pgm(path("deep.pgm")), Error);
  EXPECT_THROW(io::write_pgm((dir_ / "no" / "such" / "dir.pgm").string(), io::Gray8{1, 1, {0}}), Error);
}

TEST_F(Io, FgridRoundTripAndBytes) {
  const std::vector<double> v{1.0, -2.5, 0.0, 3.25, 1e-3, 7.0};
  io::write_fgrid(path("g.fgrid"), io::to_fgrid({2, 3}, v));
  const auto bytes = read_all(path("g.fgrid"));
  const std::string header = "FGRID v1 2 2 3\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  ASSERT_EQ(bytes.size(), header.size() + 24);
  // 1.0f = 0x3f800000, little-endian
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 3]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[header.size() + 2]), 0x80);
  const auto g = io::read_fgrid(path("g.fgrid"));
  EXPECT_EQ(g.dims, (std::vector<int>{2, 3}));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(g.values[i], static_cast<float>(v[i]));
}

TEST_F(Io, FgridErrors) {
  EXPECT_THROW(io::to_fgrid({2, 2}, {1.0}), Error);
  write_raw("bad.fgrid", "FGRIX v1 1 1\n0000");
  EXPECT_THROW(io::read_fgrid(path("bad.fgrid")), Error);
  write_raw("trunc.fgrid", "FGRID v1 1 4\n00");
  EXPECT_THROW(io::read_fgrid(path("trunc.fgrid")), Error);
  write_raw("dims.fgrid", "FGRID v1 2 4\n");
  EXPECT_THROW(io::read_fgrid(path("dims.fgrid")), Error);
}

TEST_F(Io, PpmRoundTrip) {
  const std::vector<std::uint8_t> rgb{1, 2, 3, 4, 5, 6};
  io::write_ppm(path("a.ppm"), 2, 1, rgb);
  const auto img = io::read_ppm(path("a.ppm"));
  EXPECT_EQ(img.rgb, rgb);
  EXPECT_THROW(io::write_ppm(path("b.ppm"), 3, 1, rgb), Error);
}

TEST(Heatmap, Endpoints) {
  const std::vector<double> one{1.0, 1.0}, zero{0.0}, ramp{2.0, 4.0};
  EXPECT_EQ(heatmap_rgb(one), (std::vector<std::uint8_t>{255, 0, 0, 255, 0, 0}));
  EXPECT_EQ(heatmap_rgb(zero), (std::vector<std::uint8_t>{0, 0, 255}));
  EXPECT_EQ(heatmap_rgb(ramp), (std::vector<std::uint8_t>{0, 0, 255, 255, 0, 0}));
  const std::vector<double> bad{0.0, INFINITY};
  EXPECT_THROW(heatmap_rgb(bad), Error);
  const std::vector<double> hole{0.0, NAN, 1.0};
  EXPECT_EQ(heatmap_rgb(hole)[3], 0);
  EXPECT_EQ(heatmap_rgb(hole)[5], 0);
}

TEST_F(Io, HeatmapPixelsMatchFormula) {
  Rng rng(4);
  std::vector<double> v(6 * 5);
  for (auto& x : v) x = rng.uniform(-3, 3);
  render_heatmap(v, 6, 5, path("h.ppm"), 2);
  const auto img = io::read_ppm(path("h.ppm"));
  ASSERT_EQ(img.width, 12);
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 12; ++x) {
      const double n = (v[(y / 2) * 6 + x / 2] - lo) / (hi - lo);
      const std::size_t p = (static_cast<std::size_t>(y) * 12 + x) * 3;
      EXPECT_EQ(img.rgb[p], std::lround(255 * n));
      EXPECT_EQ(img.rgb[p + 1], 0);
      EXPECT_EQ(img.rgb[p + 2], std::lround(255 * (1 - n)));
    }
  EXPECT_THROW(render_heatmap(v, 5, 5, path("x.ppm")), Error);
  EXPECT_THROW(render_heatmap(v, 6, 5, (dir_ / "nope" / "x.ppm").string()), Error);
}

TEST(Config, ParsesKeyValues) {
  std::istringstream in("# comment\n\n seed = 42\nnoise=0.25 \ngrid_h=16\n");
  const auto c = parse_config(in);
  EXPECT_EQ(c.at("seed"), "42");
  EXPECT_EQ(c.at("noise"), "0.25");
  EXPECT_EQ(c.size(), 3u);
}

TEST(Config, RejectsMalformed) {
  std::istringstream dup("a=1\na=2\n"), noeq("justakey\n"), nokey("=3\n");
  EXPECT_THROW(parse_config(dup), Error);
  EXPECT_THROW(parse_config(noeq), Error);
  EXPECT_THROW(parse_config(nokey), Error);
  EXPECT_THROW(load_config("/nonexistent/maskinject.cfg"), Error);
}

TEST(Config, EnvSeed) {
  ::setenv("MASKINJECT_SEED", "17", 1);
  EXPECT_EQ(env_seed(), 17u);
  ::setenv("MASKINJECT_SEED", "x1", 1);
  EXPECT_THROW(env_seed(), Error);
  ::unsetenv("MASKINJECT_SEED");
  EXPECT_FALSE(env_seed().has_value());
}
