#include "replayrec/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace replayrec {

double MlpGradients::norm() const {
  double sq = 0.0;
  for (const auto& w : weights) sq += w.squaredNorm();
  for (const auto& b : biases) sq += b.squaredNorm();
  return std::sqrt(sq);
}

void MlpGradients::scale(double s) {
  for (auto& w : weights) w *= s;
  for (auto& b : biases) b *= s;
}

MlpGradients& MlpGradients::operator+=(const MlpGradients& o) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += o.weights[l];
    biases[l] += o.biases[l];
  }
  return *this;
}

void clip_gradients(MlpGradients& grads, double max_norm) {
  const double n = grads.norm();
  if (n > max_norm && n > 0.0) grads.scale(max_norm / n);
}

Mlp::Mlp(std::vector<std::size_t> sizes) : sizes_(std::move(sizes)) {
  check_sizes();
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const auto out = static_cast<Eigen::Index>(sizes_[l + 1]);
    const auto in = static_cast<Eigen::Index>(sizes_[l]);
    weights_.push_back(Eigen::MatrixXd::Zero(out, in));
    biases_.push_back(Eigen::VectorXd::Zero(out));
  }
}

Mlp::Mlp(std::vector<std::size_t> sizes, Rng& rng) : Mlp(std::move(sizes)) {
  for (auto& w : weights_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols()));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  }
}

void Mlp::check_sizes() const {
  if (sizes_.size() < 2) {
    throw std::invalid_argument("an MLP needs at least input and output sizes");
  }
  for (auto s : sizes_) {
    if (s == 0) throw std::invalid_argument("MLP layer of size 0");
  }
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != input_size()) {
    throw std::invalid_argument("mlp input has size " +
                                std::to_string(x.size()) + ", expected " +
                                std::to_string(input_size()));
  }
  Eigen::VectorXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    a = (l + 1 < weights_.size()) ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpCache* cache) const {
  if (static_cast<std::size_t>(x.rows()) != input_size()) {
    throw std::invalid_argument("mlp input has " + std::to_string(x.rows()) +
                                " rows, expected " +
                                std::to_string(input_size()));
  }
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = weights_[l] * a;
    z.colwise() += biases_[l];
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = (l + 1 < weights_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
  }
  return a;
}

MlpGradients Mlp::zero_gradients() const {
  MlpGradients g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(),
                                              weights_[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
  }
  return g;
}

MlpGradients Mlp::backward(const MlpCache& cache,
                           const Eigen::MatrixXd& upstream) const {
  if (cache.pre.size() != weights_.size()) {
    throw std::invalid_argument("backward needs a cached forward pass");
  }
  if (upstream.rows() != static_cast<Eigen::Index>(output_size()) ||
      upstream.cols() != cache.pre.back().cols()) {
    throw std::invalid_argument("upstream gradient has the wrong shape");
  }
  MlpGradients g = zero_gradients();
  Eigen::MatrixXd delta = upstream;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    g.weights[l] = delta * cache.inputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    if (l > 0) {
      Eigen::MatrixXd back = weights_[l].transpose() * delta;
      const auto& z = cache.pre[l - 1];
      delta = back.array() * (z.array() > 0.0).cast<double>();
    }
  }
  return g;
}

void Mlp::sgd_step(const MlpGradients& grads, double learning_rate) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    weights_[l] -= learning_rate * grads.weights[l];
    biases_[l] -= learning_rate * grads.biases[l];
  }
}

bool Mlp::finite() const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  }
  return true;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    // Row-major weights, then biases, layer by layer.
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) {
        out.push_back(weights_[l](r, c));
      }
    }
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) {
      out.push_back(biases_[l](r));
    }
  }
  return out;
}

void Mlp::set_flat_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) {
    throw std::invalid_argument("flat parameter vector has the wrong size");
  }
  std::size_t k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r) {
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) {
        weights_[l](r, c) = flat[k++];
      }
    }
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r) {
      biases_[l](r) = flat[k++];
    }
  }
}

nlohmann::json Mlp::to_json() const {
  return {{"sizes", sizes_}, {"parameters", flat_parameters()}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
  Mlp m(j.at("sizes").get<std::vector<std::size_t>>());
  m.set_flat_parameters(j.at("parameters").get<std::vector<double>>());
  return m;
}

bool Mlp::operator==(const Mlp& o) const {
  if (sizes_ != o.sizes_) return false;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    if (weights_[l] != o.weights_[l] || biases_[l] != o.biases_[l]) {
      return false;
    }
  }
  return true;
}

}  // namespace replayrec
