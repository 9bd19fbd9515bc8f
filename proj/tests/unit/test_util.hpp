#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "specrcv/covmodel.hpp"

namespace testutil {

inline specrcv::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  specrcv::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng);
  return m;
}

inline specrcv::Matrix random_symmetric(std::size_t p, std::uint64_t seed) {
  const specrcv::Matrix a = random_matrix(p, p, seed);
  return 0.5 * (a + a.transpose());
}

/// B B^T with B of shape p x k.
inline specrcv::Matrix random_psd(std::size_t p, std::size_t k, std::uint64_t seed) {
  const specrcv::Matrix b = random_matrix(p, k, seed);
  return b * b.transpose();
}

inline oracle::Dense to_dense(const specrcv::Matrix& m) {
  oracle::Dense out(static_cast<std::size_t>(m.rows()),
                    std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("specrcv_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
