#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "egan/tensor.hpp"

namespace acceptance {

struct Criterion {
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

class Timer {
 public:
  Timer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline std::vector<double> flat_values(const egan::ParameterSet& params) {
  std::vector<double> out;
  for (const egan::Parameter* p : params.all())
    out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

inline void restore_values(egan::ParameterSet& params,
                           const std::vector<double>& flat) {
  size_t i = 0;
  for (egan::Parameter* p : params.all())
    for (double& v : p->value) v = flat[i++];
}

inline std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

// Each stage appends one entry per criterion it owns.
void run_gradient_criteria(std::vector<Criterion>& results);   // 1, 2, 3
void run_property_criteria(std::vector<Criterion>& results);   // 4, 9, 10
void run_training_criteria(std::vector<Criterion>& results);   // 5, 6, 7, 8

}  // namespace acceptance
