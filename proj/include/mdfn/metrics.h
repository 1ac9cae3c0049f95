#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mdfn/corpus.h"

namespace mdfn {

// Token-level scoring of class I, reported in percent.
struct EvalReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t tp = 0;  // gold I, predicted I
  std::size_t fp = 0;  // gold O, predicted I
  std::size_t fn = 0;  // gold I, predicted O
};

// Harmonic mean of two percentages; 0 when both are 0.
double f1_percent(double precision, double recall);

// Compares gold and predicted tag rows pairwise. Rows must line up: same
// count, same id, same length per row; mismatches raise DataError naming the
// id. Conventions when class I never occurs: all three metrics are 100 when
// tp = fp = fn = 0; a metric whose denominator alone is zero is 0.
using TagRows = std::vector<std::pair<std::string, std::vector<Tag>>>;
EvalReport evaluate_tags(const TagRows& gold, const TagRows& predicted);

// Same scoring against a corpus and per-utterance predictions in corpus order.
EvalReport evaluate_tags(const std::vector<Utterance>& gold,
                         const std::vector<std::vector<Tag>>& predicted);

}  // namespace mdfn
