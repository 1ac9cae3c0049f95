#include "mdfn/spanlab.h"

#include <algorithm>
#include <cmath>

#include "mdfn/error.h"

namespace mdfn {

std::vector<SpanCandidate> enumerate_spans(std::size_t token_count, std::size_t max_span_len) {
  if (token_count == 0) throw ShapeError("span enumeration over zero tokens");
  if (max_span_len == 0) throw ShapeError("maximum span length must be positive");
  std::size_t cap = std::min(max_span_len, token_count);
  std::vector<SpanCandidate> spans;
  spans.reserve(span_count(token_count, max_span_len));
  for (std::size_t start = 0; start < token_count; start++) {
    std::size_t last = std::min(start + cap - 1, token_count - 1);
    for (std::size_t end = start; end <= last; end++) {
      spans.push_back({start, end});
    }
  }
  return spans;
}

std::size_t span_count(std::size_t token_count, std::size_t max_span_len) {
  std::size_t cap = std::min(max_span_len, token_count);
  // sum over lengths l = 1..cap of (token_count - l + 1)
  return cap * token_count - cap * (cap - 1) / 2;
}

std::size_t length_row(std::size_t length, std::size_t max_span_len) {
  if (length < 1) throw DataError("span length must be at least 1");
  return std::min(length, max_span_len) - 1;
}

std::vector<double> span_representation(const Matrix& fused, const SpanCandidate& span,
                                        const Matrix& length_table) {
  if (span.start > span.end || span.end >= fused.rows()) {
    throw ShapeError("span [" + std::to_string(span.start) + "," + std::to_string(span.end) +
                     "] outside " + std::to_string(fused.rows()) + " tokens");
  }
  std::size_t w = fused.cols();
  std::size_t len_dim = length_table.cols();
  std::size_t row = length_row(span.length(), length_table.rows());
  std::vector<double> out;
  out.reserve(2 * w + len_dim);
  for (std::size_t j = 0; j < w; j++) out.push_back(fused(span.start, j));
  for (std::size_t j = 0; j < w; j++) out.push_back(fused(span.end, j));
  for (std::size_t j = 0; j < len_dim; j++) out.push_back(length_table(row, j));
  return out;
}

Var span_feature_matrix(Tape& tape, Var fused, Var length_table,
                        const std::vector<SpanCandidate>& spans) {
  if (spans.empty()) throw ShapeError("span feature matrix over zero spans");
  std::size_t m = tape.value(fused).rows();
  std::size_t table_rows = tape.value(length_table).rows();
  std::vector<std::size_t> starts, ends, rows;
  starts.reserve(spans.size());
  ends.reserve(spans.size());
  rows.reserve(spans.size());
  for (const SpanCandidate& s : spans) {
    if (s.start > s.end || s.end >= m) {
      throw ShapeError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                       "] outside " + std::to_string(m) + " tokens");
    }
    starts.push_back(s.start);
    ends.push_back(s.end);
    rows.push_back(length_row(s.length(), table_rows));
  }
  Var first = tape.select_rows(fused, std::move(starts));
  Var second = tape.select_rows(fused, std::move(ends));
  Var lengths = tape.select_rows(length_table, std::move(rows));
  return tape.concat_cols(tape.concat_cols(first, second), lengths);
}

std::vector<SpanPrediction> span_predictions(const Matrix& logits,
                                             const std::vector<SpanCandidate>& spans,
                                             double threshold, bool strict) {
  if (logits.rows() != spans.size() || logits.cols() != 2) {
    throw ShapeError("logits are " + logits.shape_str() + " for " +
                     std::to_string(spans.size()) + " spans, want " +
                     std::to_string(spans.size()) + "x2");
  }
  std::vector<SpanPrediction> out;
  out.reserve(spans.size());
  for (std::size_t i = 0; i < spans.size(); i++) {
    // Two-class softmax mass on I, computed as a stable sigmoid of the
    // logit difference.
    double diff = logits(i, 1) - logits(i, 0);
    double p = diff >= 0.0 ? 1.0 / (1.0 + std::exp(-diff))
                           : std::exp(diff) / (1.0 + std::exp(diff));
    bool is_i = strict ? p > threshold : p >= threshold;
    out.push_back({spans[i], p, is_i ? Tag::kI : Tag::kO});
  }
  return out;
}

std::vector<Tag> gold_span_labels(const std::vector<Tag>& tags,
                                  const std::vector<SpanCandidate>& spans, bool any_all_i) {
  std::vector<Tag> out(spans.size(), Tag::kO);
  for (std::size_t i = 0; i < spans.size(); i++) {
    const SpanCandidate& s = spans[i];
    if (s.end >= tags.size()) {
      throw ShapeError("span [" + std::to_string(s.start) + "," + std::to_string(s.end) +
                       "] outside " + std::to_string(tags.size()) + " tags");
    }
    bool all_i = true;
    for (std::size_t t = s.start; t <= s.end && all_i; t++) all_i = tags[t] == Tag::kI;
    if (!all_i) continue;
    if (any_all_i) {
      out[i] = Tag::kI;
      continue;
    }
    bool maximal = (s.start == 0 || tags[s.start - 1] == Tag::kO) &&
                   (s.end + 1 == tags.size() || tags[s.end + 1] == Tag::kO);
    if (maximal) out[i] = Tag::kI;
  }
  return out;
}

std::vector<Tag> heuristic_decode(const std::vector<SpanPrediction>& predictions,
                                  std::size_t token_count,
                                  std::vector<SpanCandidate>* accepted_out) {
  std::vector<const SpanPrediction*> positive;
  for (const SpanPrediction& p : predictions) {
    if (p.span.start > p.span.end || p.span.end >= token_count) {
      throw ShapeError("span [" + std::to_string(p.span.start) + "," +
                       std::to_string(p.span.end) + "] outside " +
                       std::to_string(token_count) + " tokens");
    }
    if (p.label == Tag::kI) positive.push_back(&p);
  }
  std::sort(positive.begin(), positive.end(),
            [](const SpanPrediction* a, const SpanPrediction* b) {
              if (a->prob_i != b->prob_i) return a->prob_i > b->prob_i;
              if (a->span.start != b->span.start) return a->span.start < b->span.start;
              return a->span.length() < b->span.length();
            });
  std::vector<Tag> tags(token_count, Tag::kO);
  for (const SpanPrediction* p : positive) {
    bool overlaps = false;
    for (std::size_t t = p->span.start; t <= p->span.end && !overlaps; t++) {
      overlaps = tags[t] == Tag::kI;
    }
    if (overlaps) continue;
    for (std::size_t t = p->span.start; t <= p->span.end; t++) tags[t] = Tag::kI;
    if (accepted_out != nullptr) accepted_out->push_back(p->span);
  }
  return tags;
}

}  // namespace mdfn
