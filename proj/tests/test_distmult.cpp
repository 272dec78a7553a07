#include <cmath>
#include <sstream>

#include "doctest.h"
#include "xsense/distmult.hpp"
#include "xsense/error.hpp"
#include "xsense/fixtures.hpp"
#include "xsense/nn/gradcheck.hpp"

using namespace xsense;
using namespace xsense::distmult;

namespace {

// Entities a, b, c and one relation in one dimension: score(h, r, t) = h * t.
DistMultModel line_model(double a, double b, double c) {
  DistMultModel m({"a", "b", "c"}, {"r"}, 1, 0);
  m.entity_embeddings().value(0, 0) = a;
  m.entity_embeddings().value(1, 0) = b;
  m.entity_embeddings().value(2, 0) = c;
  m.relation_embeddings().value(0, 0) = 1.0;
  return m;
}

}  // namespace

TEST_CASE("score algebra") {
  DistMultModel m({"x", "y"}, {"r"}, 3, 1);
  m.entity_embeddings().value.fill(0.0);
  m.entity_embeddings().value(0, 1) = 1.0;
  m.relation_embeddings().value.fill(1.0);
  CHECK(m.score(Triple{0, 0, 0}) == 1.0);
  m.relation_embeddings().value.fill(0.0);
  CHECK(m.score(Triple{0, 0, 1}) == 0.0);
  CHECK_THROWS_AS(m.score(Triple{0, 0, 2}), DataError);
  try {
    m.score(NamedTriple{"x", "r", "zebra"});
    FAIL("expected an unknown-entity error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("zebra") != std::string::npos);
  }
}

TEST_CASE("scores are exactly symmetric") {
  const DistMultModel m({"a", "b", "c", "d"}, {"r", "s"}, 16, 42);
  for (std::size_t h = 0; h < 4; ++h) {
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t r = 0; r < 2; ++r) CHECK(m.score(Triple{h, r, t}) == m.score(Triple{t, r, h}));
    }
  }
}

TEST_CASE("triple parsing") {
  std::istringstream ok("Thin Walls\tcauses\tnoisy room\n\nA\tr\tB\n");
  const auto t = parse_triples(ok);
  REQUIRE(t.size() == 2);
  CHECK(t[0] == NamedTriple{"thin walls", "causes", "noisy room"});
  std::istringstream bad("a\tb\n");
  CHECK_THROWS_AS(parse_triples(bad), DataError);
}

TEST_CASE("loss gradient matches finite differences") {
  const auto triples = fixtures::distmult_rule_triples();
  DistMultModel m = DistMultModel::for_triples(triples, 6, 3);
  Rng rng(4);
  std::vector<TrainingSample> samples;
  for (std::size_t i = 0; i < 3; ++i) samples.push_back(corrupt(m.resolve(triples[i * 7]), m.n_entities(), 4, rng));
  const auto report = nn::grad_check(m.parameters(), [&](bool acc) {
    double loss = 0.0;
    for (const auto& s : samples) loss += sample_loss(m, s, acc);
    return loss;
  });
  CHECK(report.max_error() < 1e-3);
}

TEST_CASE("corruption replaces exactly one end") {
  Rng rng(8);
  const Triple pos{1, 0, 2};
  const auto s = corrupt(pos, 10, 50, rng);
  CHECK(s.negatives.size() == 50);
  for (const Triple& n : s.negatives) {
    CHECK(n.relation == 0);
    CHECK((n.head == pos.head || n.tail == pos.tail));
    CHECK(n.head < 10);
    CHECK(n.tail < 10);
  }
}

TEST_CASE("training lowers the loss and is deterministic") {
  const auto triples = fixtures::distmult_rule_triples();
  const DistMultConfig cfg{16, 10, 4, 0.01, 5};
  const auto r = train_distmult(triples, cfg);
  REQUIRE(r.epoch_losses.size() == 11);
  CHECK(r.epoch_losses[10] < r.epoch_losses[0]);
  const auto again = train_distmult(triples, cfg);
  CHECK(again.epoch_losses == r.epoch_losses);
  CHECK(again.model.entity_embeddings().value == r.model.entity_embeddings().value);
  CHECK_THROWS_AS(train_distmult(triples, DistMultConfig{0, 1, 1, 0.01, 0}), ConfigError);
  CHECK_THROWS_AS(train_distmult(std::vector<NamedTriple>{}, cfg), DataError);
}

TEST_CASE("filtered ranking") {
  SUBCASE("hand-ranked three-entity case") {
    const DistMultModel m = line_model(1.0, 2.0, 3.0);
    // (a, r, b): b scores 2, c scores 3, a scores 1.
    const Triple ab{0, 0, 1}, ac{0, 0, 2}, ca{2, 0, 0};
    auto r = rank_eval(m, {ab}, {ab});
    CHECK(r.ranks == std::vector<std::size_t>{2});
    CHECK(r.mrr == 0.5);
    r = rank_eval(m, {ab}, {ab, ac});
    CHECK(r.ranks == std::vector<std::size_t>{1});
    // (c, r, a): a scores 3, b scores 6, c scores 9.
    r = rank_eval(m, {ab, ca}, {ab, ca});
    CHECK(r.ranks == std::vector<std::size_t>{2, 3});
    CHECK(r.mrr == doctest::Approx((0.5 + 1.0 / 3.0) / 2.0));
    CHECK(r.hits_at_1 == 0.0);
    CHECK(r.hits_at_10 == 1.0);
  }
  SUBCASE("ties rank pessimistically") {
    const DistMultModel m = line_model(0.0, 0.0, 0.0);
    CHECK(rank_eval(m, {Triple{0, 0, 1}}, {}).ranks == std::vector<std::size_t>{3});
  }
  SUBCASE("perfect and single-entity models") {
    const DistMultModel m = line_model(1.0, 0.0, -1.0);
    CHECK(rank_eval(m, {Triple{0, 0, 0}}, {}).mrr == 1.0);
    DistMultModel single({"only"}, {"r"}, 2, 0);
    CHECK(rank_eval(single, {Triple{0, 0, 0}}, {}).mrr == 1.0);
  }
  SUBCASE("empty test set") { CHECK_THROWS_AS(rank_eval(line_model(1, 2, 3), {}, {}), DataError); }
}

TEST_CASE("phrase vectors") {
  DistMultModel m({"noisy room", "noisy", "room"}, {"r"}, 2, 0);
  auto& e = m.entity_embeddings().value;
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = static_cast<double>(i + 1);
  const auto id = m.entity_id("noisy room");
  CHECK(phrase_vector(m, "Noisy  Room") == std::vector<double>{e(id, 0), e(id, 1)});
  const auto n = m.entity_id("noisy"), r = m.entity_id("room");
  const auto mean = phrase_vector(m, "room noisy");
  CHECK(mean[0] == doctest::Approx((e(n, 0) + e(r, 0)) / 2.0));
  CHECK(mean[1] == doctest::Approx((e(n, 1) + e(r, 1)) / 2.0));
  CHECK(phrase_vector(m, "purple elephant") == std::vector<double>{0.0, 0.0});
}
