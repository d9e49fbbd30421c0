#pragma once

#include "igasil/net.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>

namespace testing {

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Central difference of `f` with respect to one scalar parameter.
inline double central_difference(double& param, const std::function<double()>& f, double h = 1e-5) {
  const double saved = param;
  param = saved + h;
  const double up = f();
  param = saved - h;
  const double down = f();
  param = saved;
  return (up - down) / (2.0 * h);
}

/// Worst relative error between `analytic` and central differences over the
/// parameters of `net`. A stencil that straddles a relu kink gives central
/// differences that move with the step, so the step shrinks until halving it
/// no longer changes the estimate. Parameters with no smooth step down to
/// 1e-3 * h are skipped and counted in `skipped`.
inline double worst_fd_error(igasil::Mlp& net, const std::vector<double>& analytic, const std::function<double()>& f,
                             std::size_t* skipped = nullptr, double h = 1e-5) {
  auto central = [&](double& p, double step) {
    const double saved = p;
    p = saved + step;
    const double up = f();
    p = saved - step;
    const double down = f();
    p = saved;
    return (up - down) / (2.0 * step);
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < net.parameter_count(); ++i) {
    double& p = net.parameter(i);
    std::optional<double> fd;
    for (double step = h; step >= h * 1e-3 && !fd; step /= 10.0) {
      const double coarse = central(p, step), fine = central(p, step / 2.0);
      if (std::abs(coarse - fine) <= 1e-8 + 1e-6 * std::abs(fine)) fd = fine;
    }
    if (!fd) {
      if (skipped) ++*skipped;
      continue;
    }
    worst = std::max(worst, relative_error(analytic[i], *fd));
  }
  return worst;
}

inline igasil::Mat random_mat(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  igasil::Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

inline igasil::Vec random_vec(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  igasil::Vec v(static_cast<Eigen::Index>(n));
  for (auto& x : v) x = d(rng);
  return v;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("igasil_test_" + tag + "_" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace testing
