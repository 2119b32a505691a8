#include <sstream>

#include "doctest.h"
#include "pcdc/error.hpp"
#include "pcdc/geometry.hpp"
#include "pcdc/ply.hpp"
#include "pcdc/point_cloud.hpp"
#include "test_util.hpp"

using namespace pcdc;

namespace {

// Bit-by-bit interleave, x highest in each triple.
std::uint64_t key_oracle(const Coord& c) {
  std::uint64_t k = 0;
  for (int b = 0; b < 21; ++b) {
    k |= static_cast<std::uint64_t>((c.x >> b) & 1) << (3 * b + 2);
    k |= static_cast<std::uint64_t>((c.y >> b) & 1) << (3 * b + 1);
    k |= static_cast<std::uint64_t>((c.z >> b) & 1) << (3 * b);
  }
  return k;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("morton key basics") {
  CHECK(morton_key({0, 0, 0}) == 0);
  CHECK(morton_key({1, 0, 0}) == 4);
  CHECK(morton_key({0, 0, 1}) == 1);
  CHECK(morton_key({0, 0, 1}) < morton_key({1, 0, 0}));
  CHECK_THROWS_AS(morton_key({1 << 21, 0, 0}), Error);
  CHECK_THROWS_AS(morton_key({-1, 0, 0}), Error);
}

TEST_CASE("morton key matches the interleave oracle") {
  test::Gen g(1);
  for (int i = 0; i < 2000; ++i) {
    const Coord c = g.coord(1 << 21);
    REQUIRE(morton_key(c) == key_oracle(c));
  }
}

TEST_CASE("morton sort equals comparator sort") {
  test::Gen g(2);
  std::vector<Coord> pts;
  for (int i = 0; i < 1000; ++i) pts.push_back(g.coord(1 << 10));
  std::vector<Coord> a = pts, b = pts;
  sort_morton(a);
  std::stable_sort(b.begin(), b.end(), test::zorder_less);
  CHECK(a == b);
  CHECK(is_morton_sorted(a));
}

TEST_CASE("z-order is a strict total order on samples") {
  test::Gen g(3);
  for (int i = 0; i < 3000; ++i) {
    const Coord a = g.coord(64), b = g.coord(64), c = g.coord(64);
    const auto ka = morton_key(a), kb = morton_key(b), kc = morton_key(c);
    CHECK_FALSE((ka < kb && kb < ka));
    if (a != b) CHECK(ka != kb);
    if (ka < kb && kb < kc) CHECK(ka < kc);
    CHECK((ka < kb) == test::zorder_less(a, b));
  }
}

TEST_CASE("child slot and parent are inverse") {
  test::Gen g(4);
  for (int i = 0; i < 500; ++i) {
    const Coord c = g.coord(1 << 12);
    CHECK(child_of(parent_of(c), child_slot(c)) == c);
  }
  CHECK(child_slot({1, 0, 0}) == 4);
  CHECK(child_slot({0, 1, 1}) == 3);
}

TEST_CASE("voxelize rounds and merges") {
  {
    const std::vector<std::array<double, 3>> pts = {{0.4, 0.4, 0.4}, {0.6, 0.6, 0.6}};
    const FramePointCloud f = voxelize(pts, 10);
    REQUIRE(f.size() == 2);
    CHECK(f.coords[0] == Coord{0, 0, 0});
    CHECK(f.coords[1] == Coord{1, 1, 1});
  }
  {
    const std::vector<std::array<double, 3>> pts = {{1.2, 0, 0}, {0.8, 0, 0}};
    const FramePointCloud f = voxelize(pts, 10);
    REQUIRE(f.size() == 1);
    CHECK(f.coords[0] == Coord{1, 0, 0});
    CHECK(f.feats(0, 0) == 2.0);
  }
  {
    // 11-bit data halved lands inside the 10-bit cube
    test::Gen g(5);
    std::vector<std::array<double, 3>> pts;
    for (int i = 0; i < 2000; ++i) {
      pts.push_back({g.uniform(0, 2047) * 0.5, g.uniform(0, 2047) * 0.5, g.uniform(0, 2047) * 0.5});
    }
    const FramePointCloud f = voxelize(pts, 10);
    for (const Coord& c : f.coords) CHECK((c.x <= 1023 && c.y <= 1023 && c.z <= 1023));
    CHECK(is_morton_sorted(f.coords));
  }
  const std::vector<std::array<double, 3>> none;
  CHECK_THROWS_AS(voxelize(none, 10), Error);
}

TEST_CASE("voxelize is idempotent on integer clouds") {
  test::Gen g(6);
  const auto pts = test::random_cloud(g, 400, 256);
  std::vector<std::array<double, 3>> real;
  for (const Coord& c : pts) real.push_back({double(c.x), double(c.y), double(c.z)});
  const FramePointCloud f = voxelize(real, 10);
  CHECK(f.coords == pts);
}

TEST_CASE("make_frame rejects duplicates") {
  CHECK_THROWS_AS(make_frame({{1, 2, 3}, {1, 2, 3}}), Error);
}

TEST_CASE("coarsen chain matches floor division") {
  test::Gen g(7);
  const auto pts = test::random_cloud(g, 3000, 1024);
  std::vector<Coord> level = pts;
  for (int k = 1; k <= 4; ++k) {
    level = coarsen(level);
    std::vector<Coord> oracle;
    for (const Coord& c : pts) oracle.push_back({c.x >> k, c.y >> k, c.z >> k});
    std::sort(oracle.begin(), oracle.end());
    oracle.erase(std::unique(oracle.begin(), oracle.end()), oracle.end());
    sort_morton(oracle);
    CHECK(level == oracle);
  }
}

TEST_CASE("ply round trip ascii and binary") {
  test::Gen g(8);
  const auto pts = test::random_cloud(g, 200, 1024);
  for (auto fmt : {ply::Format::kAscii, ply::Format::kBinaryLittleEndian}) {
    std::stringstream ss;
    ply::write_coords(ss, pts, fmt);
    const auto back = ply::read_points(ss);
    REQUIRE(back.size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(back[i][0] == pts[i].x);
      CHECK(back[i][1] == pts[i].y);
      CHECK(back[i][2] == pts[i].z);
    }
  }
}

}
