// Copyright 2026 The figmtl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Training objectives for the three learning regimes:
//   single task     binary cross-entropy on the positive-class probability
//   shared encoder  lambda * L1 + (1 - lambda) * L2
//   fully shared    multi-label binary cross-entropy on sigmoid logits,
//                   summed over labels and divided by the batch size only

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "figmtl/autodiff.hpp"
#include "figmtl/errors.hpp"

namespace figmtl::objectives {

using ad::Tensor;

/// Probabilities are clamped into [kProbClamp, 1 - kProbClamp] before the log.
inline constexpr double kProbClamp = 1e-12;

struct LossComponents {
  double l1 = 0.0;
  double l2 = 0.0;
  double lambda = 0.0;
};

struct LossValue {
  double scalar = 0.0;
  std::optional<LossComponents> components;
};

struct MtlfOptions {
  /// Divide by D * m instead of D.
  bool mean_over_labels = false;
};

namespace detail {

inline void check_bits(std::span<const int> y, const char* op) {
  for (int v : y) {
    if (v != 0 && v != 1) throw ContractError(std::string(op) + ": labels must be 0 or 1");
  }
}

}  // namespace detail

/// Cross-entropy of positive-class probabilities p [D x 1] (or [D]) against bits y.
inline Tensor ce_loss(const Tensor& p, std::span<const int> y) {
  if (y.empty()) throw ContractError("ce_loss: empty batch");
  if (p.size() != y.size()) {
    throw DimensionError("ce_loss: " + std::to_string(p.size()) + " probabilities vs " +
                         std::to_string(y.size()) + " labels");
  }
  detail::check_bits(y, "ce_loss");
  const std::size_t n = y.size();
  const double inv_d = 1.0 / static_cast<double>(n);
  std::vector<int> labels(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = std::clamp(p.data()[i], kProbClamp, 1.0 - kProbClamp);
    total += labels[i] ? std::log(q) : std::log(1.0 - q);
  }
  auto pp = p.node_ptr();
  return ad::make_result(
      {1, 1}, {-total * inv_d}, {p},
      [pp, labels = std::move(labels), inv_d](ad::Node& self) {
        auto& g = pp->ensure_grad();
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const double raw = pp->value[i];
          if (raw < kProbClamp || raw > 1.0 - kProbClamp) continue;
          const double d = labels[i] ? -1.0 / raw : 1.0 / (1.0 - raw);
          g[i] += self.grad[0] * d * inv_d;
        }
      },
      "ce_loss");
}

inline LossValue ce_loss(std::span<const double> y_hat, std::span<const int> y) {
  ad::NoGradGuard no_grad;
  const auto p = Tensor::from({y_hat.size(), 1}, {y_hat.begin(), y_hat.end()});
  return {ce_loss(p, y).item(), std::nullopt};
}

inline void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ConfigError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
}

/// lambda * L1 + (1 - lambda) * L2. L1 is the hyperbole task by convention.
inline Tensor mtle_loss(const Tensor& l1, const Tensor& l2, double lambda) {
  check_lambda(lambda);
  return ad::add(ad::scale(l1, lambda), ad::scale(l2, 1.0 - lambda));
}

inline LossValue mtle_loss(const LossValue& l1, const LossValue& l2, double lambda) {
  check_lambda(lambda);
  return {lambda * l1.scalar + (1.0 - lambda) * l2.scalar,
          LossComponents{l1.scalar, l2.scalar, lambda}};
}

/// Multi-label binary cross-entropy on logits [D x m] with row-major bits y.
/// Uses -[y ln s(l) + (1-y) ln(1 - s(l))] = softplus(l) - y*l.
inline Tensor mtlf_loss(const Tensor& logits, std::span<const int> y, MtlfOptions opts = {}) {
  if (logits.rank() != 2 || logits.cols() != 2) {
    throw DimensionError("mtlf_loss: logits must be [D x 2], got " +
                         ad::shape_str(logits.shape()));
  }
  const std::size_t d = logits.rows();
  if (d == 0) throw ContractError("mtlf_loss: empty batch");
  if (y.size() != logits.size()) {
    throw DimensionError("mtlf_loss: " + std::to_string(y.size()) + " labels for logits " +
                         ad::shape_str(logits.shape()));
  }
  detail::check_bits(y, "mtlf_loss");
  ad::detail::require_finite(logits.data(), "mtlf_loss");
  const double divisor = static_cast<double>(opts.mean_over_labels ? d * 2 : d);
  std::vector<int> labels(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double l = logits.data()[i];
    total += ad::softplus(l) - labels[i] * l;
  }
  auto pl = logits.node_ptr();
  return ad::make_result(
      {1, 1}, {total / divisor}, {logits},
      [pl, labels = std::move(labels), divisor](ad::Node& self) {
        auto& g = pl->ensure_grad();
        for (std::size_t i = 0; i < labels.size(); ++i) {
          const double l = pl->value[i];
          const double s = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
          g[i] += self.grad[0] * (s - labels[i]) / divisor;
        }
      },
      "mtlf_loss");
}

inline LossValue mtlf_loss(std::span<const double> logits, std::span<const int> y,
                           MtlfOptions opts = {}) {
  if (logits.size() % 2 != 0) throw DimensionError("mtlf_loss: logits must be [D x 2]");
  ad::NoGradGuard no_grad;
  const auto l = Tensor::from({logits.size() / 2, 2}, {logits.begin(), logits.end()});
  return {mtlf_loss(l, y, opts).item(), std::nullopt};
}

}  // namespace figmtl::objectives
