#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "pesqlab/audio_io.hpp"

namespace pesqlab::testing {

// Fresh, empty directory under the system temp dir, unique per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pesqlab_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<double> sine(std::size_t n, double freq_hz, double amp = 1.0,
                                double fs = kDefaultSampleRate) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = amp * std::sin(2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / fs);
  }
  return x;
}

inline std::vector<double> gaussian(std::size_t n, std::uint64_t seed, double stddev = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, stddev);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

}  // namespace pesqlab::testing
