// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Line-oriented box files. One record per line:
//   detections:    class conf x_min y_min x_max y_max
//   ground truth:  class x_min y_min x_max y_max
// Blank lines and text after '#' are ignored.

#include "cca/det_metrics.hpp"

#include <filesystem>
#include <stdexcept>
#include <string_view>
#include <vector>

namespace cca::harness {

class BoxFileError : public std::runtime_error {
 public:
  BoxFileError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<metrics::DetectionBox> parse_detections(std::string_view text);
std::vector<metrics::GroundTruthBox> parse_ground_truths(std::string_view text);

std::vector<metrics::DetectionBox> load_detections(const std::filesystem::path& path);
std::vector<metrics::GroundTruthBox> load_ground_truths(const std::filesystem::path& path);

}  // namespace cca::harness
