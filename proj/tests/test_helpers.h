#ifndef MDFN_TESTS_TEST_HELPERS_H_
#define MDFN_TESTS_TEST_HELPERS_H_

#include <cmath>
#include <initializer_list>
#include <vector>

#include "mdfn/matrix.h"

namespace mdfn::testutil {

inline Matrix make(std::size_t rows, std::size_t cols, std::initializer_list<double> vals) {
  Matrix m(rows, cols);
  std::size_t i = 0;
  for (double v : vals) m.data()[i++] = v;
  return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); i++) {
    worst = std::max(worst, std::fabs(a.data()[i] - b.data()[i]));
  }
  return worst;
}

}  // namespace mdfn::testutil

#endif  // MDFN_TESTS_TEST_HELPERS_H_
