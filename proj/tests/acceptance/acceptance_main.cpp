// Runs every acceptance criterion and prints one verdict line per
// criterion; exits nonzero if any fail.
#include <algorithm>
#include <cstdio>
#include <exception>
#include <vector>

#include "acceptance.hpp"

namespace {

int leading_number(const std::string& name) {
  int n = 0;
  size_t i = 0;
  while (i < name.size() && name[i] >= '0' && name[i] <= '9')
    n = n * 10 + (name[i++] - '0');
  return n;
}

}  // namespace

int main() {
  std::vector<acceptance::Criterion> results;
  try {
    acceptance::run_gradient_criteria(results);
    acceptance::run_property_criteria(results);
    acceptance::run_training_criteria(results);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance aborted: %s\n", e.what());
    return 2;
  }

  std::stable_sort(results.begin(), results.end(),
                   [](const acceptance::Criterion& a,
                      const acceptance::Criterion& b) {
                     return leading_number(a.name) < leading_number(b.name);
                   });

  int failures = 0;
  for (const acceptance::Criterion& c : results) {
    if (!c.pass) ++failures;
    std::printf("[%s] %s: %s (%.1fs)\n", c.pass ? "PASS" : "FAIL",
                c.name.c_str(), c.detail.c_str(), c.seconds);
  }
  std::printf("%zu criteria, %d failed\n", results.size(), failures);
  return failures == 0 ? 0 : 1;
}
