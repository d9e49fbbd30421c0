#pragma once

// Dense feed-forward networks with hand-written backpropagation and Adam.
//
// Everything operates on mini-batches: a batch is a row-major matrix with one
// sample per row. A single sample is a 1-row batch.

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace igasil {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

enum class Activation { relu };
enum class OutputHead { tanh, softmax, sigmoid, linear };

std::string_view to_string(Activation a);
std::string_view to_string(OutputHead h);
OutputHead parse_output_head(std::string_view name);

/// Logits fed to the sigmoid head are clamped to this magnitude.
inline constexpr double kSigmoidLogitClamp = 20.0;

class Mlp;

/// Intermediates of one forward pass. Valid for exactly one backward pass on
/// the network (and parameter generation) that produced it.
struct GradTape {
  const Mlp* owner = nullptr;
  std::uint64_t generation = 0;
  bool consumed = false;
  Mat input;
  std::vector<Mat> pre;   // pre-activation per layer
  std::vector<Mat> post;  // activation per layer; post.back() is the net output
};

/// Gradients shaped like the network parameters, plus the gradient with
/// respect to the batch input.
struct Gradients {
  std::vector<Mat> weights;
  std::vector<Vec> biases;
  Mat input;

  static Gradients zeros_like(const Mlp& net);
  std::size_t size() const;
  double squared_norm() const;
  void scale(double factor);
  bool all_finite() const;
  /// Flat view in the order of Mlp::parameter().
  std::vector<double> flat() const;
  Gradients& operator+=(const Gradients& other);
};

class Mlp {
 public:
  Mlp() = default;
  /// Uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
  Mlp(std::vector<std::size_t> layer_dims, OutputHead head, std::mt19937_64& rng);
  /// All-zero parameters.
  Mlp(std::vector<std::size_t> layer_dims, OutputHead head);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t n_layers() const { return weights_.size(); }
  Activation hidden_activation() const { return Activation::relu; }
  OutputHead output_head() const { return head_; }

  const std::vector<Mat>& weights() const { return weights_; }
  const std::vector<Vec>& biases() const { return biases_; }
  /// Mutable access bumps the generation, invalidating outstanding tapes.
  std::vector<Mat>& mutable_weights();
  std::vector<Vec>& mutable_biases();

  std::size_t parameter_count() const;
  /// Flat parameter access: layer by layer, weights row-major then bias.
  double& parameter(std::size_t flat_index);
  double parameter(std::size_t flat_index) const;

  std::uint64_t generation() const { return generation_; }
  void touch() { ++generation_; }

  /// Batch forward. Rows of `input` are samples.
  Mat forward(const Mat& input, GradTape* tape = nullptr) const;
  Vec forward_one(const Vec& input) const;

  /// Backpropagate a gradient given with respect to the head output.
  Gradients backward(GradTape& tape, const Mat& output_grad) const;
  /// Backpropagate a gradient given with respect to the head's pre-activation.
  Gradients backward_from_logits(GradTape& tape, const Mat& logit_grad) const;

  /// Order-independent checksum of all parameters; used to assert read-only use.
  double checksum() const;

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  void check_tape(const GradTape& tape) const;
  const double* locate(std::size_t flat_index) const;

  std::vector<std::size_t> dims_;
  std::vector<Mat> weights_;
  std::vector<Vec> biases_;
  OutputHead head_ = OutputHead::linear;
  std::uint64_t generation_ = 0;
};

/// Apply the output head to logits, row by row.
Mat apply_head(OutputHead head, const Mat& logits);

struct AdamState {
  std::uint64_t step = 0;
  double alpha = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<Mat> m_w, v_w;
  std::vector<Vec> m_b, v_b;

  AdamState() = default;
  AdamState(const Mlp& net, double learning_rate);
};

/// One descent step of Adam on `net`. Throws std::domain_error on a
/// non-finite gradient and leaves the network untouched in that case.
void adam_step(Mlp& net, const Gradients& grads, AdamState& state);

/// Rescales `grads` so its global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

void save_weights(const Mlp& net, std::ostream& out);
void save_weights(const Mlp& net, const std::filesystem::path& path);
/// Throws std::runtime_error on malformed input; never returns a partial net.
Mlp load_weights(std::istream& in);
Mlp load_weights(const std::filesystem::path& path);

/// Row-wise concatenation helper: [a | b].
Mat hcat(const Mat& a, const Mat& b);

}  // namespace igasil
