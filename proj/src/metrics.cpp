#include "mdfn/metrics.h"

#include "mdfn/error.h"

namespace mdfn {

namespace {

EvalReport from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  EvalReport r;
  r.tp = tp;
  r.fp = fp;
  r.fn = fn;
  if (tp == 0 && fp == 0 && fn == 0) {
    r.precision = r.recall = r.f1 = 100.0;
    return r;
  }
  r.precision = tp + fp == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = f1_percent(r.precision, r.recall);
  return r;
}

void count_row(const std::string& id, const std::vector<Tag>& gold,
               const std::vector<Tag>& pred, std::size_t& tp, std::size_t& fp,
               std::size_t& fn) {
  if (gold.size() != pred.size()) {
    throw DataError("utterance " + id + ": " + std::to_string(gold.size()) +
                    " gold tags vs " + std::to_string(pred.size()) + " predicted");
  }
  for (std::size_t i = 0; i < gold.size(); i++) {
    if (pred[i] == Tag::kI) {
      (gold[i] == Tag::kI ? tp : fp)++;
    } else if (gold[i] == Tag::kI) {
      fn++;
    }
  }
}

}  // namespace

double f1_percent(double precision, double recall) {
  double sum = precision + recall;
  return sum > 0.0 ? 2.0 * precision * recall / sum : 0.0;
}

EvalReport evaluate_tags(const TagRows& gold, const TagRows& predicted) {
  if (gold.size() != predicted.size()) {
    throw DataError("gold has " + std::to_string(gold.size()) + " utterances, predictions " +
                    std::to_string(predicted.size()));
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); i++) {
    if (gold[i].first != predicted[i].first) {
      throw DataError("utterance order differs at row " + std::to_string(i + 1) + ": gold '" +
                      gold[i].first + "' vs predicted '" + predicted[i].first + "'");
    }
    count_row(gold[i].first, gold[i].second, predicted[i].second, tp, fp, fn);
  }
  return from_counts(tp, fp, fn);
}

EvalReport evaluate_tags(const std::vector<Utterance>& gold,
                         const std::vector<std::vector<Tag>>& predicted) {
  if (gold.size() != predicted.size()) {
    throw DataError("corpus has " + std::to_string(gold.size()) + " utterances, predictions " +
                    std::to_string(predicted.size()));
  }
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < gold.size(); i++) {
    count_row(gold[i].id, gold[i].tags, predicted[i], tp, fp, fn);
  }
  return from_counts(tp, fp, fn);
}

}  // namespace mdfn
