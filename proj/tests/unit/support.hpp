#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <string>

#include "fusion_probe/random.hpp"

namespace fusion_probe::testing {

inline Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
  return m;
}

/// One-hot blocks: `levels[b]` columns per block, one active column per block.
inline Eigen::MatrixXd one_hot_design(Rng& rng, Eigen::Index rows, const std::vector<int>& levels) {
  Eigen::Index cols = 0;
  for (int l : levels) cols += l;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    Eigen::Index offset = 0;
    for (int l : levels) {
      a(r, offset + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(l)))) = 1.0;
      offset += l;
    }
  }
  return a;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(FUSION_PROBE_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fusion_probe::testing
