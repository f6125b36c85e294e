#include "mtft/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "mtft/rng.hpp"

namespace mtft {

namespace {

double eval_scalar(const std::function<Var()>& build, const std::string& ctx) {
  Var root = build();
  if (root.value().size() != 1)
    throw std::invalid_argument("gradcheck: loss must be scalar, got shape " +
                                root.value().shape_str());
  double f = root.value()[0];
  if (!std::isfinite(f))
    throw std::runtime_error("gradcheck: non-finite loss " + ctx);
  return f;
}

}  // namespace

GradCheckReport gradcheck(ParameterStore& ps,
                          const std::function<Var()>& build,
                          std::uint64_t seed, std::size_t max_elements,
                          double denom_floor) {
  const double h = 1e-6;

  Var root = build();
  if (root.value().size() != 1)
    throw std::invalid_argument("gradcheck: loss must be scalar, got shape " +
                                root.value().shape_str());
  if (!std::isfinite(root.value()[0]))
    throw std::runtime_error("gradcheck: non-finite loss at the sampled point");
  ps.zero_grad();
  backward(root);

  struct Elem {
    Parameter* p;
    std::size_t i;
  };
  std::vector<Elem> elems;
  elems.reserve(ps.total_values());
  for (const auto& p : ps.all())
    for (std::size_t i = 0; i < p->value.size(); ++i)
      elems.push_back({p.get(), i});

  std::size_t total = elems.size();
  std::size_t want = total;
  if (max_elements != 0 && max_elements < total)
    want = std::min(total, std::max<std::size_t>(max_elements, 256));

  std::vector<Elem> picked;
  if (want < total) {
    Rng rng(seed);
    for (std::size_t idx : rng.sample_indices(total, want))
      picked.push_back(elems[idx]);
  } else {
    picked = std::move(elems);
  }

  GradCheckReport rep;
  rep.checked = picked.size();
  for (const Elem& e : picked) {
    double saved = e.p->value[e.i];
    e.p->value[e.i] = saved + h;
    double f_plus = eval_scalar(build, "perturbing " + e.p->name);
    e.p->value[e.i] = saved - h;
    double f_minus = eval_scalar(build, "perturbing " + e.p->name);
    e.p->value[e.i] = saved;

    double numeric = (f_plus - f_minus) / (2.0 * h);
    double analytic = e.p->grad[e.i];
    double denom =
        std::max({std::fabs(analytic), std::fabs(numeric), denom_floor});
    double rel = std::fabs(analytic - numeric) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_param = e.p->name + "[" + std::to_string(e.i) + "]";
    }
  }
  return rep;
}

}  // namespace mtft
