#include "mdfn/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "mdfn/error.h"

namespace mdfn {

GradCheckResult finite_diff_check(const std::function<double(ParamStore&)>& loss_fn,
                                  const std::function<void(ParamStore&)>& grad_fn,
                                  ParamStore& params, double step) {
  if (!(step > 0.0)) throw NumericError("finite_diff_check: step must be positive");

  grad_fn(params);
  std::map<std::string, Matrix> analytic;
  for (const auto& [path, e] : params.entries()) {
    if (!e.populated) {
      throw NumericError("finite_diff_check: gradient never populated for parameter " + path);
    }
    analytic.emplace(path, e.grad);
  }

  GradCheckResult result;
  for (auto& [path, e] : params.entries()) {
    const Matrix& a = analytic.at(path);
    double worst = 0.0;
    for (std::size_t i = 0; i < e.value.size(); i++) {
      double saved = e.value.data()[i];
      e.value.data()[i] = saved + step;
      double up = loss_fn(params);
      e.value.data()[i] = saved - step;
      double down = loss_fn(params);
      e.value.data()[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        throw NumericError("finite_diff_check: non-finite loss while perturbing " + path);
      }
      double numeric = (up - down) / (2.0 * step);
      double denom = std::max({std::fabs(a.data()[i]), std::fabs(numeric), 1e-8});
      worst = std::max(worst, std::fabs(a.data()[i] - numeric) / denom);
    }
    result.per_param[path] = worst;
    result.max_rel_err = std::max(result.max_rel_err, worst);
  }
  return result;
}

}  // namespace mdfn
