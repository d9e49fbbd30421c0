#include "igasil/net.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace igasil {

std::string_view to_string(Activation) { return "relu"; }

std::string_view to_string(OutputHead h) {
  switch (h) {
    case OutputHead::tanh: return "tanh";
    case OutputHead::softmax: return "softmax";
    case OutputHead::sigmoid: return "sigmoid";
    case OutputHead::linear: return "linear";
  }
  return "?";
}

OutputHead parse_output_head(std::string_view name) {
  if (name == "tanh") return OutputHead::tanh;
  if (name == "softmax") return OutputHead::softmax;
  if (name == "sigmoid") return OutputHead::sigmoid;
  if (name == "linear") return OutputHead::linear;
  throw std::runtime_error("unknown output head '" + std::string(name) + "'");
}

// ---------------------------------------------------------------- Gradients

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    g.weights.push_back(Mat::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    g.biases.push_back(Vec::Zero(net.biases()[l].size()));
  }
  return g;
}

std::size_t Gradients::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

double Gradients::squared_norm() const {
  double s = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    s += weights[l].squaredNorm() + biases[l].squaredNorm();
  return s;
}

void Gradients::scale(double factor) {
  for (auto& w : weights) w *= factor;
  for (auto& b : biases) b *= factor;
}

bool Gradients::all_finite() const {
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
  return true;
}

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  out.reserve(size());
  for (std::size_t l = 0; l < weights.size(); ++l) {
    out.insert(out.end(), weights[l].data(), weights[l].data() + weights[l].size());
    out.insert(out.end(), biases[l].data(), biases[l].data() + biases[l].size());
  }
  return out;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.weights.size() != weights.size())
    throw std::invalid_argument("Gradients::operator+=: layer count mismatch");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += other.weights[l];
    biases[l] += other.biases[l];
  }
  return *this;
}

// ---------------------------------------------------------------------- Mlp

namespace {

void check_dims(const std::vector<std::size_t>& dims) {
  if (dims.size() < 2) throw std::invalid_argument("Mlp needs at least input and output dims");
  for (auto d : dims)
    if (d == 0) throw std::invalid_argument("Mlp layer dims must be positive");
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> layer_dims, OutputHead head)
    : dims_(std::move(layer_dims)), head_(head) {
  check_dims(dims_);
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    weights_.push_back(Mat::Zero(dims_[l + 1], dims_[l]));
    biases_.push_back(Vec::Zero(dims_[l + 1]));
  }
}

Mlp::Mlp(std::vector<std::size_t> layer_dims, OutputHead head, std::mt19937_64& rng)
    : Mlp(std::move(layer_dims), head) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < weights_[l].size(); ++i) weights_[l].data()[i] = u(rng);
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) biases_[l][i] = u(rng);
  }
}

std::vector<Mat>& Mlp::mutable_weights() {
  ++generation_;
  return weights_;
}

std::vector<Vec>& Mlp::mutable_biases() {
  ++generation_;
  return biases_;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
  return n;
}

const double* Mlp::locate(std::size_t flat_index) const {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const auto nw = static_cast<std::size_t>(weights_[l].size());
    if (flat_index < nw) return weights_[l].data() + flat_index;
    flat_index -= nw;
    const auto nb = static_cast<std::size_t>(biases_[l].size());
    if (flat_index < nb) return biases_[l].data() + flat_index;
    flat_index -= nb;
  }
  throw std::out_of_range("Mlp::parameter index out of range");
}

double& Mlp::parameter(std::size_t flat_index) {
  const double* p = locate(flat_index);
  ++generation_;
  return *const_cast<double*>(p);
}

double Mlp::parameter(std::size_t flat_index) const { return *locate(flat_index); }

Mat apply_head(OutputHead head, const Mat& z) {
  switch (head) {
    case OutputHead::linear: return z;
    case OutputHead::tanh: return z.array().tanh().matrix();
    case OutputHead::sigmoid: {
      Mat c = z.cwiseMax(-kSigmoidLogitClamp).cwiseMin(kSigmoidLogitClamp);
      return (1.0 / (1.0 + (-c.array()).exp())).matrix();
    }
    case OutputHead::softmax: {
      Mat out(z.rows(), z.cols());
      for (Eigen::Index r = 0; r < z.rows(); ++r) {
        const double mx = z.row(r).maxCoeff();
        RowVec e = (z.row(r).array() - mx).exp().matrix();
        out.row(r) = e / e.sum();
      }
      return out;
    }
  }
  throw std::logic_error("unreachable output head");
}

Mat Mlp::forward(const Mat& input, GradTape* tape) const {
  if (weights_.empty()) throw std::logic_error("forward on an empty Mlp");
  if (static_cast<std::size_t>(input.cols()) != dims_.front()) {
    std::ostringstream msg;
    msg << "Mlp::forward: input has " << input.cols() << " columns, expected " << dims_.front();
    throw std::invalid_argument(msg.str());
  }
  if (!input.allFinite()) throw std::invalid_argument("Mlp::forward: non-finite input");

  if (tape) {
    tape->owner = this;
    tape->generation = generation_;
    tape->consumed = false;
    tape->input = input;
    tape->pre.clear();
    tape->post.clear();
  }
  Mat a = input;
  const std::size_t last = weights_.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    Mat z = a * weights_[l].transpose();
    z.rowwise() += biases_[l].transpose();
    a = (l == last) ? apply_head(head_, z) : Mat(z.cwiseMax(0.0));
    if (tape) {
      tape->pre.push_back(std::move(z));
      tape->post.push_back(a);
    }
  }
  return a;
}

Vec Mlp::forward_one(const Vec& input) const {
  Mat x = input.transpose();
  return forward(x).row(0).transpose();
}

void Mlp::check_tape(const GradTape& tape) const {
  if (tape.owner != this) throw std::logic_error("GradTape belongs to a different network");
  if (tape.generation != generation_)
    throw std::logic_error("stale GradTape: parameters changed since the forward pass");
  if (tape.consumed) throw std::logic_error("GradTape already consumed by a backward pass");
  if (tape.pre.size() != weights_.size()) throw std::logic_error("GradTape layer count mismatch");
}

Gradients Mlp::backward(GradTape& tape, const Mat& output_grad) const {
  check_tape(tape);
  const Mat& y = tape.post.back();
  if (output_grad.rows() != y.rows() || output_grad.cols() != y.cols())
    throw std::invalid_argument("Mlp::backward: output gradient shape mismatch");
  Mat dz;
  switch (head_) {
    case OutputHead::linear: dz = output_grad; break;
    case OutputHead::tanh: dz = (output_grad.array() * (1.0 - y.array().square())).matrix(); break;
    case OutputHead::sigmoid: dz = (output_grad.array() * y.array() * (1.0 - y.array())).matrix(); break;
    case OutputHead::softmax: {
      Vec inner = (output_grad.array() * y.array()).rowwise().sum();
      dz = (y.array() * (output_grad.colwise() - inner).array()).matrix();
      break;
    }
  }
  return backward_from_logits(tape, dz);
}

Gradients Mlp::backward_from_logits(GradTape& tape, const Mat& logit_grad) const {
  check_tape(tape);
  const std::size_t L = weights_.size();
  if (logit_grad.rows() != tape.pre.back().rows() || logit_grad.cols() != tape.pre.back().cols())
    throw std::invalid_argument("Mlp::backward: logit gradient shape mismatch");
  tape.consumed = true;

  Gradients g;
  g.weights.resize(L);
  g.biases.resize(L);
  Mat dz = logit_grad;
  if (head_ == OutputHead::sigmoid) {
    // Zero gradient through the clamp.
    dz = (tape.pre.back().array().abs() <= kSigmoidLogitClamp).select(dz, 0.0);
  }
  for (std::size_t l = L; l-- > 0;) {
    const Mat& a_prev = (l == 0) ? tape.input : tape.post[l - 1];
    g.weights[l] = dz.transpose() * a_prev;
    g.biases[l] = dz.colwise().sum().transpose();
    Mat da = dz * weights_[l];
    if (l == 0) {
      g.input = std::move(da);
    } else {
      dz = (tape.pre[l - 1].array() > 0.0).select(da, 0.0);
    }
  }
  return g;
}

double Mlp::checksum() const {
  double s = 0.0;
  double k = 1.0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index i = 0; i < weights_[l].size(); ++i) s += (k += 1e-3) * weights_[l].data()[i];
    for (Eigen::Index i = 0; i < biases_[l].size(); ++i) s += (k += 1e-3) * biases_[l][i];
  }
  return s;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.dims_ != b.dims_ || a.head_ != b.head_) return false;
  for (std::size_t l = 0; l < a.weights_.size(); ++l)
    if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
  return true;
}

// --------------------------------------------------------------------- Adam

AdamState::AdamState(const Mlp& net, double learning_rate) : alpha(learning_rate) {
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    m_w.push_back(Mat::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    v_w.push_back(m_w.back());
    m_b.push_back(Vec::Zero(net.biases()[l].size()));
    v_b.push_back(m_b.back());
  }
}

void adam_step(Mlp& net, const Gradients& grads, AdamState& s) {
  if (grads.weights.size() != net.n_layers() || s.m_w.size() != net.n_layers())
    throw std::invalid_argument("adam_step: layer count mismatch");
  if (!grads.all_finite()) {
    std::ostringstream msg;
    msg << "adam_step: non-finite gradient at optimizer step " << s.step + 1
        << " (squared norm " << grads.squared_norm() << ")";
    throw std::domain_error(msg.str());
  }
  s.step += 1;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  auto& W = net.mutable_weights();
  auto& B = net.mutable_biases();
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    param.array() -= s.alpha * (m.array() / bc1) / ((v.array() / bc2).sqrt() + s.eps);
  };
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    if (grads.weights[l].rows() != W[l].rows() || grads.weights[l].cols() != W[l].cols() ||
        grads.biases[l].size() != B[l].size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
    update(W[l], grads.weights[l], s.m_w[l], s.v_w[l]);
    update(B[l], grads.biases[l], s.m_b[l], s.v_b[l]);
  }
}

double clip_global_norm(Gradients& grads, double max_norm) {
  const double norm = std::sqrt(grads.squared_norm());
  if (max_norm > 0.0 && norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

// -------------------------------------------------------------- weight file

void save_weights(const Mlp& net, std::ostream& out) {
  out << "MLPV1 " << net.n_layers();
  for (auto d : net.layer_dims()) out << ' ' << d;
  out << '\n' << to_string(net.hidden_activation()) << ' ' << to_string(net.output_head()) << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t l = 0; l < net.n_layers(); ++l) {
    const Mat& w = net.weights()[l];
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) out << (c ? " " : "") << w(r, c);
      out << '\n';
    }
    const Vec& b = net.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) out << (i ? " " : "") << b[i];
    out << '\n';
  }
}

void save_weights(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write weight file " + path.string());
  save_weights(net, out);
  if (!out) throw std::runtime_error("error writing weight file " + path.string());
}

namespace {

std::vector<double> read_row(std::istream& in, std::size_t expected, std::string_view what) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("weight file truncated while reading " + std::string(what));
  std::istringstream ls(line);
  std::vector<double> vals;
  vals.reserve(expected);
  std::string tok;
  while (ls >> tok) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw std::runtime_error("weight file: malformed value '" + tok + "' in " + std::string(what));
    }
    if (used != tok.size() || !std::isfinite(v))
      throw std::runtime_error("weight file: malformed value '" + tok + "' in " + std::string(what));
    vals.push_back(v);
  }
  if (vals.size() != expected) {
    std::ostringstream msg;
    msg << "weight file: " << what << " has " << vals.size() << " values, expected " << expected;
    throw std::runtime_error(msg.str());
  }
  return vals;
}

}  // namespace

Mlp load_weights(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw std::runtime_error("weight file is empty");
  std::istringstream hs(header);
  std::string magic;
  hs >> magic;
  if (magic.rfind("MLPV", 0) != 0) throw std::runtime_error("not a weight file (bad magic '" + magic + "')");
  if (magic != "MLPV1") throw std::runtime_error("unsupported weight file version '" + magic + "'");
  std::size_t n_layers = 0;
  if (!(hs >> n_layers) || n_layers == 0) throw std::runtime_error("weight file: bad layer count");
  std::vector<std::size_t> dims(n_layers + 1);
  for (auto& d : dims)
    if (!(hs >> d) || d == 0) throw std::runtime_error("weight file: dimension header mismatch");
  std::string extra;
  if (hs >> extra) throw std::runtime_error("weight file: dimension header mismatch (extra '" + extra + "')");

  std::string act_line;
  if (!std::getline(in, act_line)) throw std::runtime_error("weight file truncated before activation line");
  std::istringstream as(act_line);
  std::string hidden, head_name;
  if (!(as >> hidden >> head_name) || hidden != "relu")
    throw std::runtime_error("weight file: bad activation line '" + act_line + "'");

  Mlp net(dims, parse_output_head(head_name));
  std::vector<Mat> W = net.weights();
  std::vector<Vec> B = net.biases();
  for (std::size_t l = 0; l < n_layers; ++l) {
    for (Eigen::Index r = 0; r < W[l].rows(); ++r) {
      auto row = read_row(in, static_cast<std::size_t>(W[l].cols()), "weight row");
      for (Eigen::Index c = 0; c < W[l].cols(); ++c) W[l](r, c) = row[static_cast<std::size_t>(c)];
    }
    auto b = read_row(in, static_cast<std::size_t>(B[l].size()), "bias row");
    for (Eigen::Index i = 0; i < B[l].size(); ++i) B[l][i] = b[static_cast<std::size_t>(i)];
  }
  std::string trailing;
  while (std::getline(in, trailing))
    if (trailing.find_first_not_of(" \t\r") != std::string::npos)
      throw std::runtime_error("weight file: unexpected trailing data");
  net.mutable_weights() = std::move(W);
  net.mutable_biases() = std::move(B);
  return net;
}

Mlp load_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weight file " + path.string());
  return load_weights(in);
}

Mat hcat(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("hcat: row count mismatch");
  Mat out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace igasil
