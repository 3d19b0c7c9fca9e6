#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "acm/verify/suites.hpp"

// One line per acceptance criterion, followed by its metrics. Exits nonzero
// when any criterion fails. ACM_ACCEPTANCE_JOBS sets the parallel runs.
int main() {
  using acm::verify::SuiteResult;
  const char* env = std::getenv("ACM_ACCEPTANCE_JOBS");
  const int jobs = env ? std::max(1, std::atoi(env)) : 1;
  const std::uint64_t seed = 20240611;

  const std::vector<std::pair<std::string, std::function<SuiteResult()>>> criteria = {
      {"kinematic oracles (1000 configurations, rel err < 1e-6, continuity gap < 1e-8, < 10 s)",
       [&] { return acm::verify::kinematic_suite(1000, seed); }},
      {"dynamics structure (500 states, symmetry, definiteness, Hessian, skew, gravity, < 60 s)",
       [&] { return acm::verify::dynamics_suite(500, seed); }},
      {"coupling entries (O(kappa) decay, quadratic vanishing at the base, printed-form deviation logged)",
       [&] { return acm::verify::coupling_entry_suite(); }},
      {"conservation (Test B energy drift < 1e-6, RK4 order in [3.7, 4.3])",
       [&] { return acm::verify::conservation_suite(); }},
      {"coupling limit (Test C gap decreasing over rho scales, < 1e-5 m at 1e-3)",
       [&] { return acm::verify::coupling_limit_suite({}, jobs); }},
      {"open-loop ordering (NRMSE_T largest for C, NRMSE_R largest for A, all nonzero, < 5 min)",
       [&] { return acm::verify::open_loop_ordering_suite({}, jobs); }},
      {"sweep directions (r_a, m_u displacement; E smallest gap; kappa0, roll gap growth)",
       [&] { return acm::verify::sweep_direction_suite({}, jobs); }},
      {"IBVS (interaction matrix, static target < 1 px, V non-increasing outside the bound set)",
       [&] { return acm::verify::ibvs_suite(seed, {}, jobs); }},
      {"letter tracking (MRAL both models, max |DS| < 0.7 px, peaks at corners or high curvature)",
       [&] { return acm::verify::letter_suite({}, jobs); }},
      {"performance (median step cost decoupled < coupled over 1e4 steps)",
       [&] { return acm::verify::performance_suite(); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const SuiteResult r = criteria[i].second();
    failed += r.pass ? 0 : 1;
    std::cout << "criterion " << std::setw(2) << i + 1 << ": " << (r.pass ? "PASS" : "FAIL") << "  "
              << criteria[i].first << "  [" << std::fixed << std::setprecision(1) << r.seconds << " s]\n"
              << std::defaultfloat << std::setprecision(6);
    for (const auto& [key, value] : r.metrics) std::cout << "    " << key << " = " << value << '\n';
    if (!r.detail.empty()) std::cout << "    " << r.detail << '\n';
    std::cout.flush();
  }
  std::cout << (criteria.size() - failed) << " of " << criteria.size() << " criteria pass\n";
  return failed == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
