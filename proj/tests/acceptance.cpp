// Runs all twelve acceptance criteria with their default budgets and prints
// one PASS/FAIL line each. Optional argument: path for a JSON report.

#include "lram/verify.hpp"

#include <cstdio>
#include <fstream>

int main(int argc, char** argv) {
  const lram::VerifyOptions opt;

  int failed = 0;
  nlohmann::json report = nlohmann::json::array();
  lram::run_acceptance(opt, [&](const lram::CriterionResult& r) {
    std::printf("%s [%d] %s: %s (%.1f s)\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.summary.c_str(),
                r.seconds);
    std::fflush(stdout);
    if (!r.passed) ++failed;
    report.push_back(lram::to_json(r));
  });
  std::printf("%d/%d criteria passed\n", lram::kCriterionCount - failed, lram::kCriterionCount);
  if (argc > 1) std::ofstream(argv[1]) << report.dump(2) << '\n';
  return failed == 0 ? 0 : 1;
}
