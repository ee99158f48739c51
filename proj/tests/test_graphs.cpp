#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "mulaaip/binary_io.hpp"
#include "mulaaip/error.hpp"
#include "mulaaip/graphs.hpp"
#include "mulaaip/synthetic.hpp"
#include "support.hpp"

using namespace mulaaip;
using namespace mulaaip::graphs;

namespace {

ProteinStructure two_residue(double separation) {
  ProteinStructure s;
  s.id = "two";
  Chain c{"A", {}};
  for (int i = 0; i < 2; ++i) {
    Residue r;
    r.index = static_cast<std::size_t>(i);
    r.name = "ALA";
    const Vec3 ca{separation * i, 0, 0};
    r.atoms = {{"N", ca + Vec3{0.5, 1.2, 0.0}, "N"}, {"CA", ca, "C"}, {"C", ca + Vec3{1.0, -0.6, 0.4}, "C"}};
    r.anchor = ca;
    c.residues.push_back(r);
  }
  s.chains.push_back(c);
  return s;
}

std::vector<Edge> brute_force(const std::vector<Vec3>& pts, double cutoff) {
  std::vector<Edge> out;
  for (std::uint32_t i = 0; i < pts.size(); ++i)
    for (std::uint32_t j = 0; j < pts.size(); ++j)
      if (i != j && distance(pts[i], pts[j]) <= cutoff) out.emplace_back(i, j);
  return out;
}

std::string embedding_file(std::initializer_list<std::tuple<std::string, std::uint32_t, std::uint32_t>> recs) {
  ByteWriter w;
  w.bytes("PLMB");
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(recs.size()));
  float next = 0.5f;
  for (const auto& [id, rows, dim] : recs) {
    w.str(id);
    w.u32(rows);
    w.u32(dim);
    for (std::uint32_t k = 0; k < rows * dim; ++k) w.f32(next += 0.25f);
  }
  return w.data();
}

}  // namespace

TEST_CASE("radius graph on two residues") {
  const basis::BasisConfig cfg;
  const auto near = build_structural_graph(two_residue(3.0), cfg);
  CHECK(near.edges == std::vector<Edge>{{0, 1}, {1, 0}});
  const auto far = build_structural_graph(two_residue(11.0), cfg);
  CHECK(far.edges.empty());
  CHECK(far.num_nodes == 2);
  CHECK_THROWS_AS(build_structural_graph(ProteinStructure{}, cfg), Error);
}

TEST_CASE("radius edges match all-pairs distances") {
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    std::vector<Vec3> pts;
    const std::size_t n = 20 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(-15, 15), rng.uniform(-15, 15), rng.uniform(-15, 15)});
    for (double c : {3.0, 10.0, 40.0}) CHECK(radius_edges(pts, c) == brute_force(pts, c));
  }
  // Points exactly on the cutoff are included.
  const std::vector<Vec3> line{{0, 0, 0}, {10, 0, 0}, {20.000001, 0, 0}};
  CHECK(radius_edges(line, 10.0) == std::vector<Edge>{{0, 1}, {1, 0}});
}

TEST_CASE("structural graph invariants") {
  Rng rng(2);
  basis::BasisConfig cfg;
  cfg.num_radial = 3;
  cfg.num_spherical = 4;
  const auto s = synthetic::random_protein(rng, 20, "A", "p");
  const auto g = build_structural_graph(s, cfg);
  const auto res = s.residues();
  CHECK(g.num_nodes == res.size());
  CHECK(g.node_class.size() == g.num_nodes);
  for (const auto& [i, j] : g.edges) {
    CHECK(i != j);
    CHECK(distance(res[i]->anchor, res[j]->anchor) <= cfg.cutoff);
    CHECK(std::binary_search(g.edges.begin(), g.edges.end(), Edge{j, i}));
  }
  const std::size_t E = g.num_edges();
  CHECK(g.edge_feat_residue.rows() == E);
  CHECK(g.edge_feat_residue.cols() == 3u * 4 * 4 + 3 * 4);
  CHECK(g.edge_feat_backbone.cols() == 3u * 3 * 4);
  CHECK(g.edge_feat_side.cols() == 3u);
  for (std::size_t i = 0; i < g.num_nodes; ++i) CHECK(g.node_class[i] == amino_acid_class(res[i]->name));
  for (std::size_t e = 0; e < E; ++e) {
    const auto& geo = g.geometry[e];
    const auto tbf = basis::encode_tbf(geo.residue.d, geo.residue.theta, geo.residue.phi, cfg);
    for (std::size_t k = 0; k < tbf.size(); ++k) CHECK(g.edge_feat_residue(e, k) == tbf[k]);
    const auto rbf = basis::encode_rbf(geo.residue.d, cfg);
    for (std::size_t k = 0; k < rbf.size(); ++k) CHECK(g.edge_feat_side(e, k) == rbf[k]);
    const auto sbf_beta = basis::encode_sbf(geo.residue.d, geo.backbone.beta, cfg);
    for (std::size_t k = 0; k < sbf_beta.size(); ++k) CHECK(g.edge_feat_backbone(e, 12 + k) == sbf_beta[k]);
  }
}

TEST_CASE("reversing chain order permutes the graph consistently") {
  Rng rng(5);
  auto h = synthetic::random_protein(rng, 9, "H", "h");
  auto l = synthetic::random_protein(rng, 7, "L", "l");
  l = testing::map_positions(l, [](const Vec3& p) { return p + Vec3{4, 0, 0}; });
  ProteinStructure both;
  both.id = "hl";
  both.chains = {h.chains[0], l.chains[0]};
  std::size_t k = 0;
  for (auto& c : both.chains)
    for (auto& r : c.residues) r.index = k++;

  const basis::BasisConfig cfg;
  const auto a = build_structural_graph(select_chains(both, {"H", "L"}), cfg);
  const auto b = build_structural_graph(select_chains(both, {"L", "H"}), cfg);
  REQUIRE(a.num_nodes == 16);
  auto perm = [](std::uint32_t i) { return i < 9 ? i + 7 : i - 9; };
  std::map<Edge, std::size_t> index_b;
  for (std::size_t e = 0; e < b.edges.size(); ++e) index_b[b.edges[e]] = e;
  REQUIRE(a.edges.size() == b.edges.size());
  for (std::size_t e = 0; e < a.edges.size(); ++e) {
    const Edge mapped{perm(a.edges[e].first), perm(a.edges[e].second)};
    REQUIRE(index_b.contains(mapped));
    const std::size_t f = index_b[mapped];
    for (std::size_t c = 0; c < a.edge_feat_residue.cols(); ++c)
      CHECK(a.edge_feat_residue(e, c) == b.edge_feat_residue(f, c));
    for (std::size_t c = 0; c < a.edge_feat_backbone.cols(); ++c)
      CHECK(a.edge_feat_backbone(e, c) == b.edge_feat_backbone(f, c));
  }
  for (std::uint32_t i = 0; i < 16; ++i) {
    CHECK(a.node_class[i] == b.node_class[perm(i)]);
    CHECK(a.side_chain_feat[i] == b.side_chain_feat[perm(i)]);
  }
}

TEST_CASE("graph serialization round trip") {
  Rng rng(8);
  const auto g = build_structural_graph(synthetic::random_protein(rng, 12, "A", "p"), basis::BasisConfig{});
  const std::string bytes = serialize_graph(g);
  const auto back = deserialize_graph(bytes);
  CHECK(back.id == g.id);
  CHECK(back.basis == g.basis);
  CHECK(back.num_nodes == g.num_nodes);
  CHECK(back.node_class == g.node_class);
  CHECK(back.side_chain_feat == g.side_chain_feat);
  CHECK(back.edges == g.edges);
  CHECK(back.edge_feat_residue == g.edge_feat_residue);
  CHECK(back.edge_feat_backbone == g.edge_feat_backbone);
  CHECK(back.edge_feat_side == g.edge_feat_side);
  CHECK(serialize_graph(back) == bytes);
  CHECK_THROWS_AS(deserialize_graph(bytes.substr(0, bytes.size() / 2)), Error);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_graph(bad), Error);
}

TEST_CASE("cosine similarity") {
  const std::vector<double> u{1, 0}, v{1, 1}, w{0, 3}, z{0, 0};
  CHECK(cosine(u, u) == 1.0);
  CHECK(cosine(u, w) == 0.0);
  CHECK(cosine(u, v) == doctest::Approx(0.70710678).epsilon(1e-8));
  try {
    cosine(u, z);
    FAIL("expected ZeroVector");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ZeroVector);
  }
  const std::vector<double> big{1e154, 1e154}, big2{2e154, 2e154};
  CHECK(cosine(big, big2) <= 1.0);
}

TEST_CASE("relation graph examples") {
  SUBCASE("single entity") {
    const auto g = build_relation_graph({"a"}, nn::Tensor(1, 3, std::vector<double>{1, 2, 3}), 32);
    CHECK(g.dense_adjacency() == nn::Tensor(1, 1, 1.0));
    CHECK(g.pattern.empty());
  }
  SUBCASE("orthogonal entities") {
    nn::Tensor e(3, 3, std::vector<double>{1, 0, 0, 0, 2, 0, 0, 0, 3});
    const auto g = build_relation_graph({"a", "b", "c"}, e, 2);
    const auto a = g.dense_adjacency();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) CHECK(a(i, j) == (i == j ? 1.0 : 0.0));
  }
  SUBCASE("zero embedding") {
    nn::Tensor e(2, 2, std::vector<double>{1, 0, 0, 0});
    CHECK_THROWS_AS(build_relation_graph({"a", "b"}, e, 1), Error);
  }
  SUBCASE("id count mismatch") {
    CHECK_THROWS_AS(build_relation_graph({"a"}, nn::Tensor(2, 2, 1.0), 1), Error);
  }
}

TEST_CASE("relation graph against the dense cosine matrix") {
  Rng rng(40);
  const std::size_t n = 10;
  const auto emb = testing::random_tensor(rng, n, 6);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("e" + std::to_string(i));
  auto dense = [&](std::size_t i, std::size_t j) {
    double uv = 0, uu = 0, vv = 0;
    for (std::size_t c = 0; c < 6; ++c) {
      uv += emb(i, c) * emb(j, c);
      uu += emb(i, c) * emb(i, c);
      vv += emb(j, c) * emb(j, c);
    }
    return uv / std::sqrt(uu * vv);
  };
  const auto full = build_relation_graph(ids, emb, 10).dense_adjacency();
  double l1 = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      CHECK(std::abs(full(i, j) - (i == j ? 1.0 : dense(i, j))) < 1e-12);
      l1 += std::abs(full(i, j));
    }
  CHECK(build_relation_graph(ids, emb, 10).l1_norm() == doctest::Approx(l1).epsilon(1e-12));

  for (std::size_t k : {1u, 2u, 4u}) {
    const auto g = build_relation_graph(ids, emb, k);
    const auto a = g.dense_adjacency();
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a(i, i) == 1.0);
      std::size_t kept = 0;
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(a(i, j) == a(j, i));
        CHECK(a(i, j) >= -1.0);
        CHECK(a(i, j) <= 1.0);
        if (i != j && a(i, j) != 0.0) {
          ++kept;
          CHECK(std::abs(a(i, j) - dense(i, j)) < 1e-12);
        }
      }
      CHECK(kept >= k);
      // The row's own top-k neighbours are always present.
      std::vector<std::pair<double, std::size_t>> row;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) row.emplace_back(-dense(i, j), j);
      std::sort(row.begin(), row.end());
      for (std::size_t r = 0; r < k; ++r) CHECK(a(i, row[r].second) != 0.0);
    }
    CHECK(std::is_sorted(g.pattern.begin(), g.pattern.end()));
  }
}

TEST_CASE("embedding file round trip") {
  EmbeddingStore store;
  store.add("x", EmbeddingMatrix{2, 3, {1.5f, -2.0f, 0.25f, 3.0f, 4.0f, -0.125f}});
  const std::string bytes = write_embeddings(store);
  const auto back = read_embeddings(bytes);
  REQUIRE(back.size() == 1);
  const auto* m = back.find("x");
  REQUIRE(m);
  CHECK(*m == *store.find("x"));
  CHECK(write_embeddings(back) == bytes);
  CHECK(m->mean_pool() == std::vector<double>{2.25, 1.0, 0.0625});

  const std::string two = embedding_file({{"a", 2, 4}, {"b", 3, 4}});
  CHECK(write_embeddings(read_embeddings(two)) == two);
}

TEST_CASE("embedding file errors") {
  auto code_of = [](const std::string& bytes) {
    try {
      read_embeddings(bytes);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  const std::string good = embedding_file({{"a", 1, 2}});
  std::string magic = good;
  magic[0] = 'Q';
  CHECK(code_of(magic) == ErrorCode::BadMagic);
  std::string version = good;
  version[4] = 9;
  CHECK(code_of(version) == ErrorCode::VersionMismatch);
  CHECK(code_of(good.substr(0, good.size() - 2)) == ErrorCode::TruncatedRecord);
  CHECK(code_of(embedding_file({{"a", 1, 2}, {"a", 1, 2}})) == ErrorCode::DuplicateId);
  CHECK(code_of(embedding_file({{"a", 1, 2}, {"b", 1, 3}})) == ErrorCode::DimMismatch);
}
