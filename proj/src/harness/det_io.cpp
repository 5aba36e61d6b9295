// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#include "cca/harness/det_io.hpp"

#include <fstream>
#include <sstream>

namespace cca::harness {

namespace {

// Splits each meaningful line into whitespace-separated fields.
template <typename F>
void for_each_record(std::string_view text, F&& on_record) {
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    std::vector<std::string> parts;
    for (std::string f; fields >> f;) parts.push_back(f);
    if (!parts.empty()) on_record(parts, line_no);
  }
}

double to_real(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw BoxFileError("cannot parse '" + s + "' as a number", line);
  return v;
}

int to_class(const std::string& s, std::size_t line) {
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw BoxFileError("cannot parse '" + s + "' as a class id", line);
  return v;
}

metrics::Box to_box(const std::vector<std::string>& p, std::size_t first, std::size_t line) {
  const metrics::Box b{to_real(p[first], line), to_real(p[first + 1], line),
                       to_real(p[first + 2], line), to_real(p[first + 3], line)};
  if (!b.valid()) throw BoxFileError("box must satisfy x_max > x_min and y_max > y_min", line);
  return b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<metrics::DetectionBox> parse_detections(std::string_view text) {
  std::vector<metrics::DetectionBox> out;
  for_each_record(text, [&](const std::vector<std::string>& p, std::size_t line) {
    if (p.size() != 6) {
      throw BoxFileError("detection needs 6 fields (class conf x_min y_min x_max y_max), got " +
                             std::to_string(p.size()),
                         line);
    }
    const double conf = to_real(p[1], line);
    if (conf < 0.0 || conf > 1.0) throw BoxFileError("confidence outside [0, 1]", line);
    out.push_back({to_class(p[0], line), conf, to_box(p, 2, line)});
  });
  return out;
}

std::vector<metrics::GroundTruthBox> parse_ground_truths(std::string_view text) {
  std::vector<metrics::GroundTruthBox> out;
  for_each_record(text, [&](const std::vector<std::string>& p, std::size_t line) {
    if (p.size() != 5) {
      throw BoxFileError("ground truth needs 5 fields (class x_min y_min x_max y_max), got " +
                             std::to_string(p.size()),
                         line);
    }
    out.push_back({to_class(p[0], line), to_box(p, 1, line)});
  });
  return out;
}

std::vector<metrics::DetectionBox> load_detections(const std::filesystem::path& path) {
  return parse_detections(read_file(path));
}

std::vector<metrics::GroundTruthBox> load_ground_truths(const std::filesystem::path& path) {
  return parse_ground_truths(read_file(path));
}

}  // namespace cca::harness
