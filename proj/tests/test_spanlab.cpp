#include <doctest.h>

#include <cmath>
#include <vector>

#include "mdfn/error.h"
#include "mdfn/gradcheck.h"
#include "mdfn/param_store.h"
#include "mdfn/rng.h"
#include "mdfn/spanlab.h"
#include "mdfn/tape.h"
#include "test_helpers.h"

using namespace mdfn;
using testutil::make;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; i++) {
    for (std::size_t j = 0; j < c; j++) m(i, j) = rng.normal();
  }
  return m;
}

std::vector<Tag> tags_from_bits(unsigned bits, std::size_t m) {
  std::vector<Tag> tags(m);
  for (std::size_t i = 0; i < m; i++) tags[i] = (bits >> i) & 1 ? Tag::kI : Tag::kO;
  return tags;
}

// Oracle confidences: probability 1 on gold-I spans, 0 elsewhere.
std::vector<SpanPrediction> oracle_predictions(const std::vector<SpanCandidate>& spans,
                                               const std::vector<Tag>& span_labels) {
  std::vector<SpanPrediction> preds;
  for (std::size_t i = 0; i < spans.size(); i++) {
    preds.push_back({spans[i], span_labels[i] == Tag::kI ? 1.0 : 0.0, span_labels[i]});
  }
  return preds;
}

}  // namespace

TEST_SUITE("spanlab") {

TEST_CASE("span enumeration order and count") {
  std::vector<SpanCandidate> spans = enumerate_spans(3, 2);
  REQUIRE(spans.size() == 5);
  CHECK(spans[0] == SpanCandidate{0, 0});
  CHECK(spans[1] == SpanCandidate{0, 1});
  CHECK(spans[2] == SpanCandidate{1, 1});
  CHECK(spans[3] == SpanCandidate{1, 2});
  CHECK(spans[4] == SpanCandidate{2, 2});

  spans = enumerate_spans(1, 4);
  REQUIRE(spans.size() == 1);
  CHECK(spans[0] == SpanCandidate{0, 0});

  CHECK(enumerate_spans(5, 3).size() == 12);  // 5 + 4 + 3

  CHECK_THROWS_AS(enumerate_spans(0, 3), ShapeError);
  CHECK_THROWS_AS(enumerate_spans(3, 0), ShapeError);
}

TEST_CASE("enumeration matches the closed form everywhere") {
  for (std::size_t m = 1; m <= 50; m++) {
    for (std::size_t l = 1; l <= 50; l++) {
      std::vector<SpanCandidate> spans = enumerate_spans(m, l);
      CHECK(spans.size() == span_count(m, l));
      for (std::size_t i = 0; i < spans.size(); i++) {
        CHECK(spans[i].start <= spans[i].end);
        CHECK(spans[i].end < m);
        CHECK(spans[i].length() <= l);
        if (i) {
          bool ordered = spans[i - 1].start < spans[i].start ||
                         (spans[i - 1].start == spans[i].start &&
                          spans[i - 1].end < spans[i].end);
          CHECK(ordered);
        }
      }
    }
  }
}

TEST_CASE("length lookup clamps and rejects zero") {
  CHECK(length_row(1, 8) == 0);
  CHECK(length_row(8, 8) == 7);
  CHECK(length_row(13, 8) == 7);  // clamp past the table
  CHECK_THROWS_AS(length_row(0, 8), DataError);
}

TEST_CASE("span vectors concatenate start, end, and length code") {
  Matrix fused = random_matrix(3, 4, 7);  // M=3, width 2d=4 (d=2)
  Matrix table = random_matrix(8, 3, 8);  // len_dim=3
  std::vector<double> v = span_representation(fused, {0, 1}, table);
  REQUIRE(v.size() == 11);  // 4*2 + 3
  for (std::size_t j = 0; j < 4; j++) {
    CHECK(v[j] == fused(0, j));
    CHECK(v[4 + j] == fused(1, j));
  }
  for (std::size_t j = 0; j < 3; j++) CHECK(v[8 + j] == table(1, j));  // length 2, row 1

  // Single-token span repeats its row.
  v = span_representation(fused, {2, 2}, table);
  for (std::size_t j = 0; j < 4; j++) CHECK(v[j] == v[4 + j]);

  // Equal lengths share the length segment.
  std::vector<double> a = span_representation(fused, {0, 1}, table);
  std::vector<double> b = span_representation(fused, {1, 2}, table);
  for (std::size_t j = 0; j < 3; j++) CHECK(a[8 + j] == b[8 + j]);

  CHECK_THROWS_AS(span_representation(fused, {1, 3}, table), ShapeError);
}

TEST_CASE("the feature matrix matches per-span vectors") {
  Matrix fused = random_matrix(4, 6, 9);
  Matrix table = random_matrix(5, 2, 10);
  std::vector<SpanCandidate> spans = enumerate_spans(4, 5);
  Tape tape;
  Var features = span_feature_matrix(tape, tape.leaf(fused, false),
                                     tape.leaf(table, false), spans);
  const Matrix& f = tape.value(features);
  REQUIRE(f.rows() == spans.size());
  REQUIRE(f.cols() == 14);  // 2*6 + 2
  for (std::size_t i = 0; i < spans.size(); i++) {
    std::vector<double> v = span_representation(fused, spans[i], table);
    for (std::size_t j = 0; j < v.size(); j++) CHECK(f(i, j) == v[j]);
  }
}

TEST_CASE("prediction probabilities and the threshold rule") {
  std::vector<SpanCandidate> spans = enumerate_spans(2, 1);  // (0,0), (1,1)
  Matrix logits(2, 2);
  logits.fill(0.0);
  // Exactly at the boundary: strict (default) stays O, inclusive flips to I.
  std::vector<SpanPrediction> preds = span_predictions(logits, spans);
  for (const SpanPrediction& p : preds) {
    CHECK(p.prob_i == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(p.label == Tag::kO);
  }
  preds = span_predictions(logits, spans, 0.5, false);
  for (const SpanPrediction& p : preds) CHECK(p.label == Tag::kI);

  logits(0, 0) = -5.0;  // O score
  logits(0, 1) = 5.0;   // I score
  logits(1, 0) = 5.0;
  logits(1, 1) = -5.0;
  preds = span_predictions(logits, spans);
  CHECK(preds[0].prob_i == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-12));
  CHECK(preds[0].label == Tag::kI);
  CHECK(preds[1].prob_i == doctest::Approx(1.0 / (1.0 + std::exp(10.0))).epsilon(1e-12));
  CHECK(preds[1].label == Tag::kO);

  // Custom threshold flips low-confidence calls.
  preds = span_predictions(logits, spans, 1e-6);
  CHECK(preds[1].label == Tag::kI);

  CHECK_THROWS_AS(span_predictions(Matrix(2, 3), spans), ShapeError);
  CHECK_THROWS_AS(span_predictions(Matrix(1, 2), spans), ShapeError);
}

TEST_CASE("gold labels mark exactly the maximal I runs") {
  std::vector<Tag> tags = {Tag::kI, Tag::kI, Tag::kO, Tag::kI};
  std::vector<SpanCandidate> spans = enumerate_spans(4, 2);
  std::vector<Tag> labels = gold_span_labels(tags, spans);
  for (std::size_t i = 0; i < spans.size(); i++) {
    bool want_i = spans[i] == SpanCandidate{0, 1} || spans[i] == SpanCandidate{3, 3};
    CHECK(labels[i] == (want_i ? Tag::kI : Tag::kO));
  }

  // All O: nothing marked.
  labels = gold_span_labels(std::vector<Tag>(4, Tag::kO), spans);
  for (Tag l : labels) CHECK(l == Tag::kO);

  // All I, M=2, L=2: only the full span.
  spans = enumerate_spans(2, 2);
  labels = gold_span_labels({Tag::kI, Tag::kI}, spans);
  for (std::size_t i = 0; i < spans.size(); i++) {
    CHECK(labels[i] == (spans[i] == SpanCandidate{0, 1} ? Tag::kI : Tag::kO));
  }

  // A run longer than every candidate gets no I span at all.
  spans = enumerate_spans(3, 2);
  labels = gold_span_labels(std::vector<Tag>(3, Tag::kI), spans);
  for (Tag l : labels) CHECK(l == Tag::kO);

  // The any-all-I alternative marks sub-spans too.
  spans = enumerate_spans(4, 2);
  labels = gold_span_labels(tags, spans, true);
  for (std::size_t i = 0; i < spans.size(); i++) {
    bool want_i = spans[i] == SpanCandidate{0, 0} || spans[i] == SpanCandidate{0, 1} ||
                  spans[i] == SpanCandidate{1, 1} || spans[i] == SpanCandidate{3, 3};
    CHECK(labels[i] == (want_i ? Tag::kI : Tag::kO));
  }

  CHECK_THROWS_AS(gold_span_labels({Tag::kO}, spans), ShapeError);
}

TEST_CASE("greedy decode keeps the confident span and drops overlaps") {
  std::vector<SpanPrediction> preds = {
      {{0, 1}, 0.9, Tag::kI},
      {{1, 2}, 0.8, Tag::kI},
  };
  std::vector<SpanCandidate> accepted;
  std::vector<Tag> tags = heuristic_decode(preds, 3, &accepted);
  CHECK(tags == std::vector<Tag>{Tag::kI, Tag::kI, Tag::kO});
  REQUIRE(accepted.size() == 1);
  CHECK(accepted[0] == SpanCandidate{0, 1});

  // No I predictions: all O.
  preds[0].label = Tag::kO;
  preds[1].label = Tag::kO;
  tags = heuristic_decode(preds, 3);
  CHECK(tags == std::vector<Tag>(3, Tag::kO));

  // Ties break toward the earlier start, then the shorter span.
  preds = {
      {{0, 1}, 0.5, Tag::kI},
      {{0, 0}, 0.5, Tag::kI},
      {{2, 2}, 0.5, Tag::kI},
  };
  accepted.clear();
  tags = heuristic_decode(preds, 3, &accepted);
  CHECK(tags == std::vector<Tag>{Tag::kI, Tag::kO, Tag::kI});
  REQUIRE(accepted.size() == 2);
  CHECK(accepted[0] == SpanCandidate{0, 0});
  CHECK(accepted[1] == SpanCandidate{2, 2});

  // Confidence outranks position.
  preds = {
      {{0, 0}, 0.6, Tag::kI},
      {{0, 1}, 0.7, Tag::kI},
  };
  tags = heuristic_decode(preds, 2);
  CHECK(tags == std::vector<Tag>{Tag::kI, Tag::kI});

  CHECK_THROWS_AS(heuristic_decode({{{0, 5}, 0.9, Tag::kI}}, 3), ShapeError);
}

TEST_CASE("oracle decode inverts gold labeling for every tag sequence") {
  // Exhaustive over M <= 8 with the span bound covering every run length.
  for (std::size_t m = 1; m <= 8; m++) {
    std::vector<SpanCandidate> spans = enumerate_spans(m, 8);
    for (unsigned bits = 0; bits < (1u << m); bits++) {
      std::vector<Tag> tags = tags_from_bits(bits, m);
      std::vector<Tag> labels = gold_span_labels(tags, spans);
      std::vector<SpanCandidate> accepted;
      std::vector<Tag> decoded =
          heuristic_decode(oracle_predictions(spans, labels), m, &accepted);
      CHECK(decoded == tags);
      // Accepted spans never overlap.
      std::vector<bool> covered(m, false);
      for (const SpanCandidate& s : accepted) {
        for (std::size_t t = s.start; t <= s.end; t++) {
          CHECK(!covered[t]);
          covered[t] = true;
        }
      }
    }
  }
}

TEST_CASE("decode then relabel with full-length candidates is a fixed point") {
  // Adjacent accepted spans can fuse into runs longer than the candidate
  // bound used at prediction time, so the round trip enumerates candidates
  // up to the full token count.
  Rng rng(77);
  for (int trial = 0; trial < 50; trial++) {
    std::size_t m = 2 + rng.below(7);
    std::vector<SpanCandidate> spans = enumerate_spans(m, 3);
    std::vector<SpanPrediction> preds;
    for (const SpanCandidate& s : spans) {
      double p = rng.uniform();
      preds.push_back({s, p, p >= 0.5 ? Tag::kI : Tag::kO});
    }
    std::vector<Tag> decoded = heuristic_decode(preds, m);

    std::vector<SpanCandidate> full = enumerate_spans(m, m);
    std::vector<Tag> labels = gold_span_labels(decoded, full);
    std::vector<Tag> again = heuristic_decode(oracle_predictions(full, labels), m);
    CHECK(again == decoded);
  }
}

TEST_CASE("gradients reach fused rows and one table row per span") {
  // Classifier over span features, with the fused matrix itself a parameter:
  // the chain classify -> concat -> row select checks out against finite
  // differences end to end.
  std::size_t m = 4, width = 6, len_dim = 3, max_len = 3;
  std::vector<SpanCandidate> spans = enumerate_spans(m, max_len);
  std::vector<Tag> tags = {Tag::kO, Tag::kI, Tag::kI, Tag::kO};
  std::vector<Tag> labels = gold_span_labels(tags, spans);
  std::vector<std::size_t> gold;
  for (Tag l : labels) gold.push_back(static_cast<std::size_t>(l));

  ParamStore store(31);
  store.insert("fused", random_matrix(m, width, 41));
  store.insert("table", random_matrix(max_len, len_dim, 42));
  store.create("cls.w", 2 * width + len_dim, 2, Init::kXavier);
  store.create("cls.b", 1, 2, Init::kZeros);

  auto forward = [&](Tape& tape, TapeBinding& params) {
    Var features = span_feature_matrix(tape, params["fused"], params["table"], spans);
    Var logits = tape.linear(features, params["cls.w"], params["cls.b"]);
    return tape.cross_entropy(logits, gold);
  };
  auto loss_fn = [&](ParamStore& s) {
    Tape tape;
    TapeBinding params(tape, s);
    return tape.value(forward(tape, params))(0, 0);
  };
  auto grad_fn = [&](ParamStore& s) {
    s.zero_grads();
    Tape tape;
    TapeBinding params(tape, s);
    tape.backward(forward(tape, params));
    params.accumulate_grads();
  };
  GradCheckResult r = finite_diff_check(loss_fn, grad_fn, store, 1e-4);
  CHECK(r.max_rel_err < 1e-4);

  // A single length-2 span lookup leaves a gradient in row 1 only.
  store.zero_grads();
  {
    Tape tape;
    TapeBinding params(tape, store);
    Var features = span_feature_matrix(tape, params["fused"], params["table"], {{1, 2}});
    tape.backward(tape.mean_all(features));
    params.accumulate_grads();
  }
  const Matrix& tg = store.grad("table");
  for (std::size_t i = 0; i < tg.rows(); i++) {
    for (std::size_t j = 0; j < tg.cols(); j++) {
      if (i == 1) {
        CHECK(tg(i, j) != 0.0);
      } else {
        CHECK(tg(i, j) == 0.0);
      }
    }
  }
}

}  // TEST_SUITE
