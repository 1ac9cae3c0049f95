#ifndef MDFN_GRADCHECK_H_
#define MDFN_GRADCHECK_H_

#include <functional>
#include <map>
#include <string>

#include "mdfn/param_store.h"

namespace mdfn {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::map<std::string, double> per_param;  // max relative error per parameter
};

// Central-difference check of analytic gradients.
//
// grad_fn must zero the store gradients, run the forward pass, and leave
// d(loss)/d(theta) in the store. loss_fn must evaluate the same loss without
// touching gradients. Every element of every parameter is perturbed by
// +/- step and the quotient (f(t + h) - f(t - h)) / 2h is compared to the
// analytic value with relative error |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult finite_diff_check(const std::function<double(ParamStore&)>& loss_fn,
                                  const std::function<void(ParamStore&)>& grad_fn,
                                  ParamStore& params, double step);

}  // namespace mdfn

#endif  // MDFN_GRADCHECK_H_
