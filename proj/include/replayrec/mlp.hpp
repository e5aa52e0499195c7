#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "json.hpp"
#include "replayrec/common.hpp"

namespace replayrec {

struct MlpGradients {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  double norm() const;
  void scale(double s);
  MlpGradients& operator+=(const MlpGradients& o);
};

// Activations kept from a batched forward pass; columns are samples.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
};

// Fully connected network: rectifier on hidden layers, identity output.
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized.
  explicit Mlp(std::vector<std::size_t> sizes);
  // He-uniform weights, zero biases.
  Mlp(std::vector<std::size_t> sizes, Rng& rng);

  std::size_t input_size() const { return sizes_.front(); }
  std::size_t output_size() const { return sizes_.back(); }
  std::size_t layers() const { return weights_.size(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  std::size_t parameter_count() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpCache* cache) const;

  // Gradient of a scalar loss given dLoss/dOutput for each cached sample.
  MlpGradients backward(const MlpCache& cache,
                        const Eigen::MatrixXd& upstream) const;
  MlpGradients zero_gradients() const;

  // params -= learning_rate * grads
  void sgd_step(const MlpGradients& grads, double learning_rate);
  bool finite() const;

  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);

  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

  bool operator==(const Mlp& o) const;

 private:
  void check_sizes() const;

  std::vector<std::size_t> sizes_;
  std::vector<Eigen::MatrixXd> weights_;  // (out x in)
  std::vector<Eigen::VectorXd> biases_;
};

// Rescales `grads` so its global L2 norm is at most `max_norm`.
void clip_gradients(MlpGradients& grads, double max_norm);

}  // namespace replayrec
