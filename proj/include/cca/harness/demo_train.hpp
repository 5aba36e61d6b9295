// Copyright 2026 The CCA Kernels Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Toy objectness training on a synthetic scene. A 1x1 convolution head on the
// block output predicts a per-pixel logit, scored with binary cross-entropy
// against the patch mask and trained by plain gradient descent.

#include "cca/harness/run_config.hpp"
#include "cca/harness/synthetic.hpp"

#include <ostream>
#include <stdexcept>
#include <vector>

namespace cca::harness {

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::size_t epoch)
      : std::runtime_error("loss became non-finite at epoch " + std::to_string(epoch)),
        epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

template <typename Scalar>
struct DemoModel {
  CcaParams<Scalar> block;
  ConvSpec<Scalar> head;  // c_out -> 1, 1x1

  template <typename F>
  void visit(F&& f) {
    block.visit(f);
    head.visit("head", f);
  }
  template <typename F>
  void visit(F&& f) const {
    block.visit(f);
    head.visit("head", f);
  }
};

template <typename Scalar>
DemoModel<Scalar> make_demo_model(const CcaConfig& config, std::uint64_t seed);

struct DemoResult {
  std::vector<Patch> patches;
  // Entry e holds the state before update e; the last entry is the state
  // after the final update, so both traces have epochs + 1 entries.
  std::vector<double> losses;
  std::vector<std::vector<Position>> keys;  // input-pixel coordinates

  double initial_loss() const { return losses.front(); }
  double final_loss() const { return losses.back(); }
  /// Share of final keys within `radius` (Chebyshev) of some patch center.
  double keys_near_patches(std::size_t radius) const;
};

/// Mean binary cross-entropy with logits. `grad` receives dL/dlogit.
template <typename Scalar>
double bce_with_logits(const Tensor<Scalar>& logits, const Tensor<Scalar>& target,
                       Tensor<Scalar>* grad);

/// Objectness target at the block output resolution: an output pixel is
/// positive when any input pixel of its stride x stride cell is.
template <typename Scalar>
Tensor<Scalar> downsample_mask(const Tensor<Scalar>& mask, std::size_t stride);

/// Throws DivergenceError if the loss stops being finite.
template <typename Scalar>
DemoResult demo_train(const RunConfig& config, std::uint64_t seed);

DemoResult demo_train(const RunConfig& config, std::uint64_t seed);  // dispatches on dtype

void write_loss_trace(std::ostream& out, const DemoResult& result);
void write_key_trace(std::ostream& out, const DemoResult& result);

}  // namespace cca::harness
