#pragma once

#include <cstddef>
#include <vector>

#include "mdfn/corpus.h"
#include "mdfn/matrix.h"
#include "mdfn/tape.h"

namespace mdfn {

// Span machinery over the fused per-token matrix: enumerate candidates up to
// a length bound, build span vectors [fused[start] ; fused[end] ; length
// code], classify each as I/O, and decode span decisions back to token tags.

struct SpanCandidate {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  std::size_t length() const { return end - start + 1; }
  bool operator==(const SpanCandidate& o) const { return start == o.start && end == o.end; }
};

// All spans with length <= min(max_span_len, token_count), ordered by
// (start, end). Throws ShapeError when either argument is zero.
std::vector<SpanCandidate> enumerate_spans(std::size_t token_count, std::size_t max_span_len);

// Closed form for enumerate_spans(...).size().
std::size_t span_count(std::size_t token_count, std::size_t max_span_len);

// Length-table row for a span length: row length-1, lengths past the table
// clamp to the last row. Throws DataError when length < 1.
std::size_t length_row(std::size_t length, std::size_t max_span_len);

// One span vector: concat(fused[start], fused[end], table[row]). Table rows
// are max_span_len x len_dim. Throws ShapeError when the span exceeds fused.
std::vector<double> span_representation(const Matrix& fused, const SpanCandidate& span,
                                        const Matrix& length_table);

// Tape version for every candidate at once: n_spans x (2 * fused width
// + len_dim). Gradients flow into fused rows and the looked-up table rows.
Var span_feature_matrix(Tape& tape, Var fused, Var length_table,
                        const std::vector<SpanCandidate>& spans);

struct SpanPrediction {
  SpanCandidate span;
  double prob_i = 0.0;
  Tag label = Tag::kO;
};

// logits: n_spans x 2, column 0 the O score, column 1 the I score. prob_i is
// the two-class softmax mass on I. strict labels I only when prob_i exceeds
// the threshold, so an all-zero classifier (prob exactly 0.5 everywhere)
// stays all O; strict = false admits the boundary.
std::vector<SpanPrediction> span_predictions(const Matrix& logits,
                                             const std::vector<SpanCandidate>& spans,
                                             double threshold = 0.5, bool strict = true);

// Gold labels per candidate. Default rule: a span is I iff it exactly equals
// a maximal contiguous run of I tags (sub-spans stay O), which makes oracle
// decoding invert labeling. any_all_i instead marks every span whose tokens
// are all I.
std::vector<Tag> gold_span_labels(const std::vector<Tag>& tags,
                                  const std::vector<SpanCandidate>& spans,
                                  bool any_all_i = false);

// Greedy decode: I-labeled predictions sorted by (prob_i desc, start asc,
// shorter first) are accepted unless they overlap an accepted span; tokens
// under accepted spans become I. accepted_out, when given, receives the
// accepted spans in acceptance order.
std::vector<Tag> heuristic_decode(const std::vector<SpanPrediction>& predictions,
                                  std::size_t token_count,
                                  std::vector<SpanCandidate>* accepted_out = nullptr);

}  // namespace mdfn
