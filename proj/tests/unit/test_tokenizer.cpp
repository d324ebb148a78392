#include <doctest.h>

#include <limits>
#include <random>

#include "fovea/error.hpp"
#include "fovea/frame.hpp"
#include "fovea/tokenizer.hpp"
#include "../oracles.hpp"

using namespace fovea;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::set<oracle::Cell> cells_of(const PatchLayout& l) {
  std::set<oracle::Cell> s;
  for (const auto& p : l.patches) s.insert({p.x0, p.y0, p.size});
  return s;
}

bool exact_partition(const PatchLayout& l) {
  std::vector<int> cover(static_cast<std::size_t>(l.frame_w) * l.frame_h, 0);
  for (const auto& p : l.patches) {
    if (p.x0 < 0 || p.y0 < 0 || p.x0 + p.size > l.frame_w || p.y0 + p.size > l.frame_h) return false;
    for (int y = p.y0; y < p.y0 + p.size; ++y)
      for (int x = p.x0; x < p.x0 + p.size; ++x) ++cover[static_cast<std::size_t>(y) * l.frame_w + x];
  }
  return std::all_of(cover.begin(), cover.end(), [](int c) { return c == 1; });
}

}  // namespace

TEST_SUITE("tokenizer") {

TEST_CASE("uniform grid counts") {
  CHECK(uniform_grid(448, 448, 32).patches.size() == 196);
  CHECK(uniform_grid(1440, 1440, 32).patches.size() == 2025);
  CHECK(token_budget(uniform_grid(448, 448, 32)).vs_uniform_base == 1.0);
  try {
    uniform_grid(100, 100, 32);
    FAIL("expected NonDivisiblePatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNonDivisiblePatch);
  }
}

TEST_CASE("token ratio of 196/2025 equals the Gaze pixel ratio") {
  const double tok = 196.0 / 2025.0;
  const auto b = pixel_budget({ConditionKind::kGaze, 448, 448, 448, 448}, 1440, 1440);
  CHECK(tok == doctest::Approx(b.ratio_vs_full).epsilon(1e-12));
}

TEST_CASE("spec parsing") {
  const auto s = parse_foveation_spec("base=16,r=224,448");
  CHECK(s.base_patch == 16);
  REQUIRE(s.ring_radii.size() == 2);
  CHECK(s.ring_radii[1] == 448);
  CHECK(std::isinf(parse_foveation_spec("base=8,r=inf").ring_radii[0]));
  CHECK_THROWS_AS(parse_foveation_spec("base=16,r=448,224"), Error);
  CHECK_THROWS_AS(parse_foveation_spec("base=0"), Error);
  CHECK_THROWS_AS(parse_foveation_spec("base=16,q=1"), Error);
}

TEST_CASE("infinite radius leaves the base grid") {
  const FoveationSpec spec{16, {kInf}};
  const auto l = foveated_grid(256, 256, {0, 3, 3, 1}, spec);
  CHECK(cells_of(l) == cells_of(uniform_grid(256, 256, 16)));
}

TEST_CASE("zero radius with far gaze merges every block once") {
  const FoveationSpec spec{8, {0.0}};
  const auto l = foveated_grid(64, 64, {0, -1000, -1000, 1}, spec);
  CHECK(cells_of(l) == cells_of(uniform_grid(64, 64, 16)));
  CHECK(token_budget(l).vs_uniform_base == 0.25);
}

TEST_CASE("1440 default spec matches the per-cell oracle") {
  const FoveationSpec spec;
  const auto l = foveated_grid(1440, 1440, {0, 720, 720, 1}, spec);
  const auto expected = oracle::foveated_cells(1440, 1440, 720, 720, 16, {224, 448});
  CHECK(cells_of(l) == expected);
  CHECK(l.patches.size() == expected.size());
  const auto tb = token_budget(l);
  CHECK(tb.vs_uniform_base > 1.0 / 16.0);
  CHECK(tb.vs_uniform_base < 1.0);
  MESSAGE("1440^2 default spec, central gaze: " << tb.tokens << " tokens");
}

TEST_CASE("misaligned base patch") {
  try {
    foveated_grid(100, 96, {0, 0, 0, 1}, FoveationSpec{16, {100}});
    FAIL("expected SpecMisaligned");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSpecMisaligned);
  }
}

TEST_CASE("property: random cases match the oracle and partition the frame") {
  std::mt19937_64 rng(31);
  for (int c = 0; c < 300; ++c) {
    const int base = 1 << std::uniform_int_distribution<int>(2, 4)(rng);
    const int w = base * std::uniform_int_distribution<int>(1, 256 / base)(rng);
    const int h = base * std::uniform_int_distribution<int>(1, 256 / base)(rng);
    std::vector<double> radii;
    double r = 0;
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < n; ++i) radii.push_back(r += std::uniform_real_distribution<double>(1, 120)(rng));
    const double gx = std::uniform_real_distribution<double>(-0.5 * w, 1.5 * w)(rng);
    const double gy = std::uniform_real_distribution<double>(-0.5 * h, 1.5 * h)(rng);
    const auto l = foveated_grid(w, h, {0, gx, gy, 1}, FoveationSpec{base, radii});
    REQUIRE(exact_partition(l));
    CHECK(cells_of(l) == oracle::foveated_cells(w, h, gx, gy, base, radii));
    CHECK(l.patches.size() <= uniform_grid(w, h, base).patches.size());
  }
}

TEST_CASE("property: token count is symmetric about the frame center") {
  std::mt19937_64 rng(32);
  for (int c = 0; c < 100; ++c) {
    const int w = 512, h = 384;
    const double gx = std::uniform_real_distribution<double>(0, w)(rng);
    const double gy = std::uniform_real_distribution<double>(0, h)(rng);
    const FoveationSpec spec{16, {60, 150}};
    const auto a = foveated_grid(w, h, {0, gx, gy, 1}, spec).patches.size();
    const auto b = foveated_grid(w, h, {0, w - gx, h - gy, 1}, spec).patches.size();
    CHECK(a == b);
  }
}


TEST_CASE("property: size monotonicity when the largest size divides the frame") {
  std::mt19937_64 rng(33);
  int violations = 0;
  for (int c = 0; c < 300; ++c) {
    const int base = 1 << std::uniform_int_distribution<int>(2, 4)(rng);
    const int n = std::uniform_int_distribution<int>(1, 3)(rng);
    const int top = base << n;
    const int w = top * std::uniform_int_distribution<int>(1, std::max(1, 256 / top))(rng);
    const int h = top * std::uniform_int_distribution<int>(1, std::max(1, 256 / top))(rng);
    std::vector<double> radii;
    double r = 0;
    for (int i = 0; i < n; ++i) radii.push_back(r += std::uniform_real_distribution<double>(1, 120)(rng));
    const double gx = std::uniform_real_distribution<double>(-0.5 * w, 1.5 * w)(rng);
    const double gy = std::uniform_real_distribution<double>(-0.5 * h, 1.5 * h)(rng);
    const auto l = foveated_grid(w, h, {0, gx, gy, 1}, FoveationSpec{base, radii});
    if (!oracle::size_monotonic(cells_of(l), gx, gy)) ++violations;
  }
  CHECK(violations == 0);
}

}  // TEST_SUITE
