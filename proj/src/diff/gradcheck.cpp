#include "tcat/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "tcat/errors.hpp"

namespace tcat::diff {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

CheckReport finite_diff_check(const std::function<Tensor()>& f,
                              const std::vector<ParamStore::Entry>& params, double eps,
                              double tol) {
  if (!(eps > 0.0)) throw ValidationError("finite_diff_check: eps must be positive");
  CheckReport report;
  report.tol = tol;

  for (const auto& p : params) p.tensor.zero_grad();
  {
    Tape tape;
    Tensor root;
    {
      TapeScope scope(tape);
      root = f();
    }
    if (!std::isfinite(root.item())) {
      report.diagnostic = "non-finite value at the unperturbed point";
      return report;
    }
    tape.backward(root);
  }

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    if (p.tensor.has_grad()) {
      analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
    } else {
      analytic.emplace_back(p.tensor.size(), 0.0);
    }
    p.tensor.zero_grad();
  }

  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor t = params[k].tensor;
    auto& data = t.leaf_data();
    ParamCheck pc;
    pc.name = params[k].name;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = f().item();
      data[i] = saved - eps;
      const double down = f().item();
      data[i] = saved;
      if (!std::isfinite(up) || !std::isfinite(down)) {
        report.diagnostic = "non-finite value when perturbing " + pc.name + "[" +
                            std::to_string(i) + "]";
        report.params.push_back(pc);
        report.passed = false;
        return report;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[k][i], numeric);
      if (i == 0 || err > pc.max_rel_err) {
        pc.max_rel_err = err;
        pc.worst_index = i;
        pc.analytic = analytic[k][i];
        pc.numeric = numeric;
      }
    }
    report.max_rel_err = std::max(report.max_rel_err, pc.max_rel_err);
    report.params.push_back(std::move(pc));
  }
  report.passed = report.max_rel_err <= tol;
  return report;
}

}  // namespace tcat::diff
