#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "opinrec/nn.hpp"

namespace opinrec::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[<index>]"
  std::size_t checked = 0;
};

/// Relative error between analytic and numeric derivatives, with the
/// denominator floored so entries that are both ~0 compare absolutely.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Central differences over every unfrozen scalar in `params` against the
/// tape gradient of `build`. `build` must be deterministic.
inline GradCheck check_gradients(nn::Parameters& params, const std::function<nn::Var(nn::Tape&)>& build,
                                 double step = 1e-4, double floor = 1e-6) {
  params.zero_grad();
  {
    nn::Tape tape;
    tape.backward(build(tape));
  }
  GradCheck res;
  auto eval = [&] {
    nn::Tape tape;
    return build(tape).scalar();
  };
  for (auto& [name, t] : params) {
    if (t.frozen) continue;
    std::vector<double> analytic = t.grad;
    for (std::size_t i = 0; i < t.size(); ++i) {
      double keep = t.value[i];
      t.value[i] = keep + step;
      double up = eval();
      t.value[i] = keep - step;
      double down = eval();
      t.value[i] = keep;
      double numeric = (up - down) / (2.0 * step);
      double err = relative_error(analytic[i], numeric, floor);
      ++res.checked;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  params.zero_grad();
  return res;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("opinrec_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p) << content;
}

}  // namespace opinrec::testing
