#pragma once

#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>

#include "visemeforge/autodiff.hpp"
#include "visemeforge/nn.hpp"

namespace vftest {

// Independent gradient oracle: central finite differences over every scalar
// parameter, compared against the analytic gradients from ad::backward. Lives
// in test code only; the implementation under test never calls it.
struct GradCheckResult {
  double max_rel_err = 0.0;
  double frac_ok = 1.0;  // fraction of coordinates with rel err <= tol
  long coords = 0;
};

inline GradCheckResult finite_difference_gradcheck(
    vf::nn::ParamSet& params, const std::function<vf::ad::Var()>& loss_fn, double h = 1e-5,
    double tol = 1e-4) {
  params.zero_grads();
  vf::ad::Var loss = loss_fn();
  vf::ad::backward(loss);
  const std::vector<double> analytic = params.grads_flat();
  std::vector<double> x = params.values_flat();

  GradCheckResult result;
  result.coords = static_cast<long>(x.size());
  long ok = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    params.set_values_flat(x);
    const double f_plus = loss_fn()->scalar();
    x[i] = orig - h;
    params.set_values_flat(x);
    const double f_minus = loss_fn()->scalar();
    x[i] = orig;
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::fabs(a - numeric) / std::max({1e-6, std::fabs(a), std::fabs(numeric)});
    if (rel <= tol) ++ok;
    result.max_rel_err = std::max(result.max_rel_err, rel);
  }
  params.set_values_flat(x);
  result.frac_ok =
      x.empty() ? 1.0 : static_cast<double>(ok) / static_cast<double>(x.size());
  return result;
}

// Scratch directory unique per-test, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    base_ = std::filesystem::temp_directory_path() /
            ("vftest_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::remove_all(base_);
    std::filesystem::create_directories(base_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(base_, ec);
  }
  std::string path(const std::string& rel = "") const {
    return rel.empty() ? base_.string() : (base_ / rel).string();
  }

 private:
  static inline int counter_ = 0;
  std::filesystem::path base_;
};

}  // namespace vftest
