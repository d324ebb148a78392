#include <doctest.h>

#include <algorithm>
#include <random>

#include "fovea/error.hpp"
#include "fovea/gaze.hpp"

using namespace fovea;

namespace {

SyncPolicy raw_policy(std::int64_t max_gap = 500'000'000) {
  SyncPolicy p;
  p.max_gap_ns = max_gap;
  p.smooth_window_ns = 0;
  return p;
}

GazeTrack track_of(std::vector<GazeSample> s, int w = 1440, int h = 1440) {
  GazeTrack t;
  t.samples = std::move(s);
  t.frame_w = w;
  t.frame_h = h;
  return t;
}

}  // namespace

TEST_SUITE("gaze") {

TEST_CASE("parse: single row without confidence") {
  const auto t = parse_gaze_csv("timestamp_ns,x_px,y_px\n0,720,720", 1440, 1440);
  REQUIRE(t.samples.size() == 1);
  CHECK(t.samples[0].x_px == 720);
  CHECK(t.samples[0].y_px == 720);
  CHECK(t.samples[0].confidence == 1.0);
  CHECK(t.warning_count == 0);
}

TEST_CASE("parse: rows are sorted by time") {
  const auto t = parse_gaze_csv("timestamp_ns,x_px,y_px,confidence\n200,1,1,1\n100,2,2,0.5\n", 10, 10);
  REQUIRE(t.samples.size() == 2);
  CHECK(t.samples[0].t_ns == 100);
  CHECK(t.samples[1].t_ns == 200);
}

TEST_CASE("parse: bad rows are counted, not fatal") {
  const auto t = parse_gaze_csv("timestamp_ns,x_px,y_px\n5,abc,10\n6,1,1\n", 10, 10);
  CHECK(t.samples.size() == 1);
  CHECK(t.warning_count == 1);
}

TEST_CASE("parse: CRLF, BOM and off-frame coordinates") {
  const auto t = parse_gaze_csv("\xEF\xBB\xBFtimestamp_ns,x_px,y_px\r\n0,-5,2000\r\n", 1440, 1440);
  REQUIRE(t.samples.size() == 1);
  CHECK(t.samples[0].x_px == -5);
  CHECK(t.samples[0].y_px == 2000);
}

TEST_CASE("parse: conflicting duplicate timestamp keeps the first") {
  const auto t = parse_gaze_csv("timestamp_ns,x_px,y_px\n0,1,1\n0,2,2\n0,1,1\n", 10, 10);
  REQUIRE(t.samples.size() == 1);
  CHECK(t.samples[0].x_px == 1);
  CHECK(t.warning_count == 1);
}

TEST_CASE("parse: header is required") {
  CHECK_THROWS_AS(parse_gaze_csv("0,1,1\n", 10, 10), Error);
  try {
    parse_gaze_csv("", 10, 10);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMissingHeader);
  }
}

TEST_CASE("parse: confidence outside [0,1] rejects the row") {
  const auto t = parse_gaze_csv("timestamp_ns,x_px,y_px,confidence\n0,1,1,1.5\n1,1,1,-0.1\n2,1,1,0.3\n", 10, 10);
  CHECK(t.samples.size() == 1);
  CHECK(t.warning_count == 2);
}

TEST_CASE("gaze_at: exact hit") {
  const auto g = gaze_at(track_of({{0, 100, 100, 1}}), 0, raw_policy());
  CHECK(g.x_px == 100);
  CHECK(g.y_px == 100);
}

TEST_CASE("gaze_at: nearest sample within tolerance") {
  const auto t = track_of({{0, 0, 0, 1}, {2'000'000'000, 200, 200, 1}});
  const auto g = gaze_at(t, 400'000'000, raw_policy(1'000'000'000));
  CHECK(g.x_px == 0);
  CHECK(g.y_px == 0);
}

TEST_CASE("gaze_at: ties go to the earlier sample") {
  const auto t = track_of({{0, 10, 10, 1}, {200, 20, 20, 1}});
  CHECK(gaze_at(t, 100, raw_policy()).x_px == 10);
}

TEST_CASE("gaze_at: empty track with center fallback") {
  auto p = raw_policy();
  p.fallback = GazeFallback::kCenter;
  const auto g = gaze_at(track_of({}), 0, p);
  CHECK(g.x_px == 720);
  CHECK(g.y_px == 720);
}

TEST_CASE("gaze_at: empty track with last_valid fallback throws EmptyTrack") {
  try {
    gaze_at(track_of({}), 0, raw_policy());
    FAIL("expected EmptyTrack");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyTrack);
  }
}

TEST_CASE("gaze_at: gap carries the last valid sample") {
  const auto t = track_of({{0, 50, 60, 1}, {10'000'000'000, 900, 900, 1}});
  const auto g = gaze_at(t, 3'000'000'000, raw_policy());
  CHECK(g.x_px == 50);
  CHECK(g.y_px == 60);
}

TEST_CASE("gaze_at: before the first usable sample falls back to center") {
  const auto t = track_of({{5'000'000'000, 50, 60, 1}});
  const auto g = gaze_at(t, 0, raw_policy());
  CHECK(g.x_px == 720);
}

TEST_CASE("gaze_at: low-confidence samples are missing") {
  const auto t = track_of({{0, 10, 10, 0.9}, {100, 500, 500, 0.1}});
  CHECK(gaze_at(t, 100, raw_policy()).x_px == 10);
}

TEST_CASE("gaze_at: output is clamped into the frame") {
  const auto g = gaze_at(track_of({{0, -5, 2000, 1}}), 0, raw_policy());
  CHECK(g.x_px == 0);
  CHECK(g.y_px == 1439);
}

TEST_CASE("gaze_at: median smoothing rejects a single spike") {
  const auto t = track_of({{-40, 100, 100, 1}, {-20, 101, 99, 1}, {0, 900, 900, 1},
                           {20, 102, 101, 1}, {40, 100, 100, 1}});
  auto p = raw_policy();
  p.smooth_window_ns = 50;
  const auto g = gaze_at(t, 0, p);
  CHECK(g.x_px == 101);
  CHECK(g.y_px == 100);
}

TEST_CASE("property: exact-timestamp query without smoothing is the identity") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> coord(0, 1439);
  std::vector<GazeSample> s;
  for (int i = 0; i < 200; ++i) s.push_back({i * 20'000'000LL, coord(rng), coord(rng), 1});
  const auto t = track_of(s);
  for (const auto& x : s) {
    const auto g = gaze_at(t, x.t_ns, raw_policy());
    CHECK(g.x_px == x.x_px);
    CHECK(g.y_px == x.y_px);
  }
}

TEST_CASE("property: smoothed output stays within the window's min/max") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> coord(0, 1439);
  std::vector<GazeSample> s;
  for (int i = 0; i < 300; ++i) s.push_back({i * 7'000'000LL, coord(rng), coord(rng), 1});
  const auto t = track_of(s);
  auto p = raw_policy();
  p.smooth_window_ns = 100'000'000;
  std::uniform_int_distribution<std::int64_t> when(0, 299 * 7'000'000LL);
  for (int k = 0; k < 500; ++k) {
    const auto q = when(rng);
    double lo_x = 1e9, hi_x = -1e9, lo_y = 1e9, hi_y = -1e9;
    for (const auto& x : s)
      if (x.t_ns >= q - p.smooth_window_ns && x.t_ns <= q + p.smooth_window_ns) {
        lo_x = std::min(lo_x, x.x_px);
        hi_x = std::max(hi_x, x.x_px);
        lo_y = std::min(lo_y, x.y_px);
        hi_y = std::max(hi_y, x.y_px);
      }
    const auto g = gaze_at(t, q, p);
    CHECK(g.x_px >= lo_x);
    CHECK(g.x_px <= hi_x);
    CHECK(g.y_px >= lo_y);
    CHECK(g.y_px <= hi_y);
  }
}

TEST_CASE("crop_region: worked examples") {
  CHECK(crop_region({0, 720, 720, 1}, 1440, 1440, 448, 448) == CropRegion{496, 496, 448, 448});
  CHECK(crop_region({0, 10, 1430, 1}, 1440, 1440, 448, 448) == CropRegion{0, 992, 448, 448});
  const auto r = crop_region({0, -5, 2000, 1}, 1440, 1440, 448, 448);
  CHECK(r == CropRegion{0, 992, 448, 448});
  CHECK(r.clamped);
  CHECK_FALSE(crop_region({0, 720, 720, 1}, 1440, 1440, 448, 448).clamped);
}

TEST_CASE("crop_region: round half up") {
  CHECK(crop_region({0, 720.5, 720.49, 1}, 1440, 1440, 448, 448) == CropRegion{497, 496, 448, 448});
}

TEST_CASE("crop_region: crop larger than frame") {
  try {
    crop_region({0, 0, 0, 1}, 100, 100, 101, 50);
    FAIL("expected CropLargerThanFrame");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kCropLargerThanFrame);
  }
}

TEST_CASE("property: containment and centering over random points") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> dim(16, 2000);
  for (int i = 0; i < 5000; ++i) {
    const int fw = dim(rng), fh = dim(rng);
    const int cw = std::uniform_int_distribution<int>(1, fw)(rng);
    const int ch = std::uniform_int_distribution<int>(1, fh)(rng);
    std::uniform_real_distribution<double> gx(-0.5 * fw, 1.5 * fw), gy(-0.5 * fh, 1.5 * fh);
    const GazeSample g{0, gx(rng), gy(rng), 1};
    const auto r = crop_region(g, fw, fh, cw, ch);
    REQUIRE(r.x0 >= 0);
    REQUIRE(r.y0 >= 0);
    REQUIRE(r.x0 + r.w <= fw);
    REQUIRE(r.y0 + r.h <= fh);
    const bool interior = g.x_px >= cw / 2.0 && g.x_px <= fw - cw / 2.0 && g.y_px >= ch / 2.0 &&
                          g.y_px <= fh - ch / 2.0;
    // Odd crops have no centre pixel, so the half-pixel guarantee is for even sizes.
    if (interior && cw % 2 == 0 && ch % 2 == 0) {
      CHECK(std::abs(r.x0 + cw / 2.0 - g.x_px) <= 0.5);
      CHECK(std::abs(r.y0 + ch / 2.0 - g.y_px) <= 0.5);
    }
  }
}

}  // TEST_SUITE
