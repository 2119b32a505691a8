#include <set>

#include "doctest.h"
#include "pcdc/config.hpp"
#include "pcdc/error.hpp"
#include "pcdc/nn/grad_check.hpp"
#include "pcdc/scale.hpp"
#include "test_util.hpp"

using namespace pcdc;
using nn::Tensor;

TEST_SUITE("scale") {

TEST_CASE("pooling examples") {
  const std::vector<Coord> one = {{0, 0, 0}, {1, 1, 1}};
  const OctantPooling p = pool_octants(one);
  REQUIRE(p.parents.size() == 1);
  CHECK(p.parents[0] == Coord{0, 0, 0});
  CHECK(p.mask[0] == 0x81);

  const std::vector<Coord> two = {{0, 0, 0}, {2, 2, 2}};
  const OctantPooling q = pool_octants(two);
  REQUIRE(q.parents.size() == 2);
  CHECK(q.parents[1] == Coord{1, 1, 1});

  const std::vector<Coord> unsorted = {{1, 1, 1}, {0, 0, 0}};
  try {
    pool_octants(unsorted);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kScanOrderError);
  }
}

TEST_CASE("pooling pigeonhole and parent links") {
  test::Gen g(1);
  for (int t = 0; t < 30; ++t) {
    const auto pts = test::random_cloud(g, static_cast<std::size_t>(g.integer(1, 3000)), g.integer(2, 200));
    const OctantPooling p = pool_octants(pts);
    CHECK(p.parents.size() <= pts.size());
    CHECK(8 * p.parents.size() >= pts.size());
    CHECK(p.parents == coarsen(pts));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(p.parents[(*p.parent_of_child)[i]] == parent_of(pts[i]));
      CHECK((*p.slot)[i] == child_slot(pts[i]));
    }
  }
}

TEST_CASE("neighbor occupancy matches a set oracle") {
  test::Gen g(2);
  const auto pts = test::random_cloud(g, 600, 12);
  const std::set<Coord> s(pts.begin(), pts.end());
  const Tensor t = neighbor_occupancy(pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::size_t col = 0;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          if (!dx && !dy && !dz) continue;
          const bool occ = s.count({pts[i].x + dx, pts[i].y + dy, pts[i].z + dz}) > 0;
          CHECK(t(i, col++) == (occ ? 1.0 : 0.0));
        }
  }
}

TEST_CASE("downsample matches a dense re-implementation") {
  test::Gen g(3);
  CodecConfig cfg;
  const auto pts = test::random_cloud(g, 300, 16);
  const Tensor feats = g.tensor(pts.size(), 3);
  const DownsampleBlock block = make_downsample("d", 3, 5, OutputAct::kRelu, cfg);
  const ScaleLevel out = downsample(block, ScaleLevel{0, pts, feats});

  const auto parents = coarsen(pts);
  REQUIRE(out.coords == parents);
  Tensor x(parents.size(), 8 * 3 + 8);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto pi = static_cast<std::size_t>(
        std::lower_bound(parents.begin(), parents.end(), parent_of(pts[i]),
                         [](const Coord& a, const Coord& b) { return morton_key(a) < morton_key(b); }) -
        parents.begin());
    const auto s = static_cast<std::size_t>(child_slot(pts[i]));
    for (std::size_t c = 0; c < 3; ++c) x(pi, s * 3 + c) = feats(i, c);
    x(pi, 24 + s) = 1.0;
  }
  const Tensor y = nn::forward(block.mlp, x).y;
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(out.feats[i] == std::max(0.0, y[i]));
}

TEST_CASE("upsample keep-all and tie rule") {
  CodecConfig cfg;
  UpsampleBlock b = make_upsample("u", 2, 3, cfg);
  const ScaleLevel one{1, {{4, 4, 4}}, Tensor(1, 2, 0.5)};
  const UpsampleResult all = upsample(b, one, 8);
  CHECK(all.level.coords.size() == 8);
  CHECK(is_morton_sorted(all.level.coords));

  // zero network: equal logits, Morton order decides
  for (auto& l : b.occupancy.layers) {
    l.weight.value.fill(0.0);
    l.bias.value.fill(0.0);
  }
  const ScaleLevel two{1, {{0, 0, 0}, {1, 0, 0}}, Tensor(2, 2, 1.0)};
  const UpsampleResult four = upsample(b, two, 4);
  std::vector<Coord> expect;
  for (int s = 0; s < 4; ++s) expect.push_back(child_of({0, 0, 0}, s));
  CHECK(four.level.coords == expect);
  const UpsampleResult nine = upsample(b, two, 9);
  CHECK(nine.level.coords.size() == 9);
  CHECK(nine.level.coords.back() == child_of({1, 0, 0}, 0));

  try {
    upsample(b, two, 17);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInsufficientCandidates);
  }
  CHECK_THROWS_AS(upsample(b, two, 0), Error);
}

TEST_CASE("down then up candidate set covers the original") {
  test::Gen g(4);
  CodecConfig cfg;
  const auto pts = test::shell_cloud(g, 800, 10.0, 30);
  const OctantPooling pool = pool_octants(pts);
  std::vector<Coord> candidates;
  for (const Coord& p : pool.parents)
    for (int s = 0; s < 8; ++s) candidates.push_back(child_of(p, s));
  const std::set<Coord> cand(candidates.begin(), candidates.end());
  for (const Coord& c : pts) CHECK(cand.count(c) == 1);

  const UpsampleBlock b = make_upsample("u", 4, 2, cfg);
  nn::Graph G(false);
  const UpsampleOutput o = upsample_forward(G, b, pool.parents, G.constant(g.tensor(pool.parents.size(), 4)),
                                            pts.size(), pts);
  CHECK(o.coords == pts);
  const Tensor t = occupancy_targets(pool.parents, pts);
  for (std::size_t i = 0; i < pool.parents.size(); ++i)
    for (int s = 0; s < 8; ++s) CHECK(t(i, static_cast<std::size_t>(s)) == ((pool.mask[i] >> s) & 1));
}

TEST_CASE("block gradients") {
  test::Gen g(5);
  CodecConfig cfg;
  const auto pts = test::random_cloud(g, 40, 6);
  const OctantPooling pool = pool_octants(pts);
  DownsampleBlock d = make_downsample("d", 2, 3, OutputAct::kLayerNorm, cfg);
  nn::Param x{"x", g.tensor(pts.size(), 2)};
  auto ps = test::params_of(d);
  test::jitter_biases(ps, g);
  ps.push_back(&x);
  CHECK(nn::grad_check([&](nn::Graph& G) { return d.forward(G, pool, G.param(x)); }, ps) < 1e-4);

  UpsampleBlock u = make_upsample("u", 3, 2, cfg);
  nn::Param f{"f", g.tensor(pool.parents.size(), 3)};
  auto us = test::params_of(u);
  test::jitter_biases(us, g);
  us.push_back(&f);
  CHECK(nn::grad_check([&](nn::Graph& G) {
          const UpsampleOutput o = upsample_forward(G, u, pool.parents, G.param(f), pts.size(), pts);
          return G.concat_cols({G.sum(o.feats), G.sum(o.probs)});
        },
        us) < 1e-4);
}

}
