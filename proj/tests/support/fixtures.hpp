// Random networks and samples shared by the unit and acceptance tests.
#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "adsm/network.hpp"
#include "adsm/training.hpp"
#include "oracles.hpp"

namespace fixture {

struct SmallNet {
  adsm::FeatureExtractor net;
  int patch = 0;
  std::string description;
};

// Up to `max_linear` conv/deconv layers ending in a conv, each optionally followed by BN and/or
// ReLU (never after the last), channels in [2, max_channels]. Every parameter is randomized.
inline SmallNet random_small_net(std::mt19937_64& rng, int max_linear = 3, int max_channels = 8) {
  std::uniform_int_distribution<int> count(1, max_linear), kernel(2, 4), chan(2, max_channels);
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.5, 1.5);
  while (true) {
    const int n = count(rng);
    std::vector<bool> is_deconv(static_cast<std::size_t>(n));
    std::vector<int> k(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      is_deconv[i] = i + 1 < n && coin(rng);
      k[i] = kernel(rng);
    }
    // Walk backwards from a 1x1 output to the input size.
    int size = 1;
    bool ok = true;
    for (int i = n - 1; i >= 0; --i) {
      size = is_deconv[i] ? size - k[i] + 1 : size + k[i] - 1;
      if (size < 1) ok = false;
    }
    if (!ok || size < 2) continue;

    SmallNet out;
    out.patch = size;
    std::vector<adsm::Layer> layers;
    int in = 1;
    for (int i = 0; i < n; ++i) {
      const bool last = i + 1 == n;
      const int c = chan(rng);
      const bool bn = !last && coin(rng);
      const bool relu = !last && coin(rng);
      adsm::FilterBank bank({k[i]}, in, c, !bn);
      oracle::randomize(bank, rng);
      for (double& w : bank.weights) w *= 0.6;
      if (is_deconv[i]) {
        adsm::DeconvLayer l;
        static_cast<adsm::FilterBank&>(l) = bank;
        layers.emplace_back(l);
        out.description += "D" + std::to_string(k[i]);
      } else {
        adsm::ConvLayer l;
        static_cast<adsm::FilterBank&>(l) = bank;
        layers.emplace_back(l);
        out.description += "C" + std::to_string(k[i]);
      }
      out.description += "x" + std::to_string(c);
      if (bn) {
        adsm::BatchNorm b(c);
        for (int j = 0; j < c; ++j) {
          b.gamma[j] = pos(rng);
          b.beta[j] = 0.3 * u(rng);
          b.running_mean[j] = 0.3 * u(rng);
          b.running_var[j] = pos(rng);
        }
        layers.emplace_back(b);
        out.description += "+BN";
      }
      if (relu) {
        layers.emplace_back(adsm::ReLU{c});
        out.description += "+ReLU";
      }
      if (!last) out.description += " ";
      in = c;
    }
    out.net = adsm::FeatureExtractor(std::move(layers));
    return out;
  }
}

inline adsm::TrainingSample random_sample(int patch, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  adsm::TrainingSample s;
  s.left_patch = adsm::Tensor(patch, patch, 1);
  s.right_strip = adsm::Tensor(patch, patch + adsm::kStripExtra, 1);
  for (double& v : s.left_patch.values()) v = u(rng);
  for (double& v : s.right_strip.values()) v = u(rng);
  s.label = adsm::make_label();
  return s;
}

struct GradientCheck {
  double worst_excess = 0.0;  // max over parameters of |a - f| - tolerance (<= 0 means pass)
  std::size_t parameters = 0;
};

// Compares analytic gradients with central differences using |a - f| <= max(abs_floor,
// rel * max(|a|, |f|)).
inline GradientCheck check_gradients(const adsm::FeatureExtractor& net,
                                     const std::vector<adsm::TrainingSample>& batch,
                                     adsm::NormMode mode, double step, double rel,
                                     double abs_floor) {
  const adsm::BatchPass pass = adsm::forward_backward(net, batch, mode);
  const auto numeric = oracle::finite_difference(
      net, [&](const adsm::FeatureExtractor& n) { return adsm::batch_loss(n, batch, mode); },
      step);
  const auto analytic = pass.gradients.parameters();
  GradientCheck result;
  result.worst_excess = -1.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    for (std::size_t j = 0; j < analytic[i].size(); ++j) {
      const double a = analytic[i][j];
      const double f = numeric[i][j];
      const double tol = std::max(abs_floor, rel * std::max(std::abs(a), std::abs(f)));
      result.worst_excess = std::max(result.worst_excess, std::abs(a - f) - tol);
      ++result.parameters;
    }
  }
  return result;
}

}  // namespace fixture
