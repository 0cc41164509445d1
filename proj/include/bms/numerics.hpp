#pragma once

// Minimal dense f64 tensor kernel with a reverse-mode tape, Adam, gradient
// checking and parameter checkpoints. Desk scale: everything double,
// everything deterministic.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bms/errors.hpp"

namespace bms {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)),
        data(std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                             std::multiplies<>()),
             fill) {}

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }
  static Tensor row(std::vector<double> v) {
    Tensor t({1, v.size()});
    t.data = std::move(v);
    return t;
  }
  static Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v) {
    if (v.size() != r * c) throw Error(ErrorCode::ShapeError, "matrix() size");
    Tensor t;
    t.shape = {r, c};
    t.data = std::move(v);
    return t;
  }

  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.size() == 2 ? shape[0] : 1; }
  std::size_t cols() const { return shape.empty() ? 0 : shape.back(); }

  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  std::string shape_str() const {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ")";
    return os.str();
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::ShapeError, std::string(op) + ": " + a.shape_str() +
                                           " vs " + b.shape_str());
}

// Named trainable parameters with matching gradient buffers.
class ModelParams {
 public:
  Tensor& create(const std::string& name, Tensor init) {
    auto [it, fresh] = values_.emplace(name, std::move(init));
    if (!fresh) throw Error(ErrorCode::ShapeError, "duplicate param '" + name + "'");
    grads_.emplace(name, Tensor(it->second.shape));
    return it->second;
  }

  bool has(const std::string& name) const { return values_.count(name) > 0; }
  Tensor& value(const std::string& name) { return values_.at(name); }
  const Tensor& value(const std::string& name) const { return values_.at(name); }
  Tensor& grad(const std::string& name) { return grads_.at(name); }

  void zero_grads() {
    for (auto& [k, g] : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
  }

  const std::map<std::string, Tensor>& values() const { return values_; }
  std::map<std::string, Tensor>& values() { return values_; }

 private:
  std::map<std::string, Tensor> values_;
  std::map<std::string, Tensor> grads_;
};

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

class Tape {
 public:
  using Ref = int;

  Ref constant(Tensor t) { return push(std::move(t), nullptr, ""); }

  Ref param(ModelParams& params, const std::string& name) {
    return push(params.value(name), nullptr, name, &params);
  }

  const Tensor& value(Ref r) const { return nodes_[r].value; }
  const Tensor& grad(Ref r) const { return nodes_[r].grad; }
  double scalar(Ref r) const {
    if (nodes_[r].value.size() != 1)
      throw Error(ErrorCode::ShapeError, "scalar() on non-scalar");
    return nodes_[r].value.data[0];
  }

  // -- ops -----------------------------------------------------------------

  Ref matmul(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols() != B.rows())
      throw Error(ErrorCode::ShapeError,
                  "matmul: " + A.shape_str() + " x " + B.shape_str());
    std::size_t m = A.rows(), k = A.cols(), n = B.cols();
    Tensor C({m, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double aip = A.at(i, p);
        if (aip == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) C.at(i, j) += aip * B.at(p, j);
      }
    return push(std::move(C), [a, b, m, k, n](Tape& t, Node& self) {
      const Tensor& A = t.val(a);
      const Tensor& B = t.val(b);
      Tensor& gA = t.nodes_[a].grad;
      Tensor& gB = t.nodes_[b].grad;
      // dA = dC B^T, dB = A^T dC
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double g = self.grad.at(i, j);
          if (g == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) {
            gA.at(i, p) += g * B.at(p, j);
            gB.at(p, j) += g * A.at(i, p);
          }
        }
    }, a, b);
  }

  Ref add(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_same_shape(A, B, "add");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
    return push(std::move(C), [a, b](Tape& t, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        t.nodes_[a].grad.data[i] += self.grad.data[i];
        t.nodes_[b].grad.data[i] += self.grad.data[i];
      }
    }, a, b);
  }

  // (m,n) + (1,n) broadcast, for biases
  Ref add_rowvec(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (B.rows() != 1 || B.cols() != A.cols())
      throw Error(ErrorCode::ShapeError,
                  "add_rowvec: " + A.shape_str() + " + " + B.shape_str());
    Tensor C = A;
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) C.at(i, j) += B.at(0, j);
    return push(std::move(C), [a, b](Tape& t, Node& self) {
      Tensor& gA = t.nodes_[a].grad;
      Tensor& gB = t.nodes_[b].grad;
      for (std::size_t i = 0; i < self.grad.rows(); ++i)
        for (std::size_t j = 0; j < self.grad.cols(); ++j) {
          gA.at(i, j) += self.grad.at(i, j);
          gB.at(0, j) += self.grad.at(i, j);
        }
    }, a, b);
  }

  Ref scale(Ref a, double s) {
    Tensor C = val(a);
    for (double& x : C.data) x *= s;
    return push(std::move(C), [a, s](Tape& t, Node& self) {
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        t.nodes_[a].grad.data[i] += s * self.grad.data[i];
    }, a);
  }

  Ref mul(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    require_same_shape(A, B, "mul");
    Tensor C = A;
    for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
    return push(std::move(C), [a, b](Tape& t, Node& self) {
      const Tensor& A = t.val(a);
      const Tensor& B = t.val(b);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        t.nodes_[a].grad.data[i] += self.grad.data[i] * B.data[i];
        t.nodes_[b].grad.data[i] += self.grad.data[i] * A.data[i];
      }
    }, a, b);
  }

  Ref relu(Ref a) {
    Tensor C = val(a);
    for (double& x : C.data) x = x > 0 ? x : 0.0;
    return push(std::move(C), [a](Tape& t, Node& self) {
      const Tensor& A = t.val(a);
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        if (A.data[i] > 0) t.nodes_[a].grad.data[i] += self.grad.data[i];
    }, a);
  }

  Ref sigmoid(Ref a) {
    Tensor C = val(a);
    for (double& x : C.data) x = 1.0 / (1.0 + std::exp(-x));
    return push(std::move(C), [a](Tape& t, Node& self) {
      const Tensor& S = self.value;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        t.nodes_[a].grad.data[i] +=
            self.grad.data[i] * S.data[i] * (1.0 - S.data[i]);
    }, a);
  }

  Ref mean_rows(Ref a) {
    const Tensor& A = val(a);
    std::size_t m = A.rows(), n = A.cols();
    Tensor C({1, n});
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) C.at(0, j) += A.at(i, j) / double(m);
    return push(std::move(C), [a, m, n](Tape& t, Node& self) {
      Tensor& gA = t.nodes_[a].grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
          gA.data[i * n + j] += self.grad.at(0, j) / double(m);
    }, a);
  }

  Ref concat_rows(Ref a, Ref b) {
    const Tensor& A = val(a);
    const Tensor& B = val(b);
    if (A.cols() != B.cols())
      throw Error(ErrorCode::ShapeError,
                  "concat_rows: " + A.shape_str() + " / " + B.shape_str());
    Tensor C({A.rows() + B.rows(), A.cols()});
    std::copy(A.data.begin(), A.data.end(), C.data.begin());
    std::copy(B.data.begin(), B.data.end(), C.data.begin() + A.size());
    return push(std::move(C), [a, b](Tape& t, Node& self) {
      Tensor& gA = t.nodes_[a].grad;
      Tensor& gB = t.nodes_[b].grad;
      for (std::size_t i = 0; i < gA.size(); ++i) gA.data[i] += self.grad.data[i];
      for (std::size_t i = 0; i < gB.size(); ++i)
        gB.data[i] += self.grad.data[gA.size() + i];
    }, a, b);
  }

  // Embedding lookup: rows of `a` selected by index.
  Ref gather_rows(Ref a, std::vector<std::size_t> idx) {
    const Tensor& A = val(a);
    std::size_t n = A.cols();
    Tensor C({idx.size(), n});
    for (std::size_t i = 0; i < idx.size(); ++i) {
      if (idx[i] >= A.rows())
        throw Error(ErrorCode::ShapeError, "gather_rows: index out of range");
      std::copy_n(A.data.begin() + idx[i] * n, n, C.data.begin() + i * n);
    }
    return push(std::move(C), [a, idx = std::move(idx), n](Tape& t, Node& self) {
      Tensor& gA = t.nodes_[a].grad;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < n; ++j)
          gA.data[idx[i] * n + j] += self.grad.at(i, j);
    }, a);
  }

  // z = mu + exp(logvar/2) * eps with eps held constant.
  Ref reparam(Ref mu, Ref logvar, const Tensor& eps) {
    const Tensor& M = val(mu);
    const Tensor& L = val(logvar);
    require_same_shape(M, L, "reparam");
    require_same_shape(M, eps, "reparam(eps)");
    Tensor C = M;
    for (std::size_t i = 0; i < C.size(); ++i)
      C.data[i] += std::exp(0.5 * L.data[i]) * eps.data[i];
    return push(std::move(C), [mu, logvar, eps](Tape& t, Node& self) {
      const Tensor& L = t.val(logvar);
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        t.nodes_[mu].grad.data[i] += self.grad.data[i];
        t.nodes_[logvar].grad.data[i] +=
            self.grad.data[i] * 0.5 * std::exp(0.5 * L.data[i]) * eps.data[i];
      }
    }, mu, logvar);
  }

  // Mean over rows of -log softmax(logits)[label].
  Ref softmax_cross_entropy(Ref logits, std::vector<int> labels) {
    const Tensor& Z = val(logits);
    std::size_t m = Z.rows(), c = Z.cols();
    if (labels.size() != m)
      throw Error(ErrorCode::ShapeError, "softmax_cross_entropy: label count");
    Tensor probs({m, c});
    double loss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double mx = Z.at(i, 0);
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, Z.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) sum += std::exp(Z.at(i, j) - mx);
      double logsum = std::log(sum) + mx;
      for (std::size_t j = 0; j < c; ++j)
        probs.at(i, j) = std::exp(Z.at(i, j) - logsum);
      loss -= Z.at(i, labels[i]) - logsum;
    }
    loss /= double(m);
    Tensor out({1, 1});
    out.data[0] = loss;
    return push(std::move(out),
                [logits, labels = std::move(labels), probs = std::move(probs), m,
                 c](Tape& t, Node& self) {
                  double g = self.grad.data[0] / double(m);
                  Tensor& gZ = t.nodes_[logits].grad;
                  for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                      gZ.at(i, j) += g * (probs.at(i, j) -
                                          (int(j) == labels[i] ? 1.0 : 0.0));
                }, logits);
  }

  // Mean binary cross-entropy; probabilities clamped away from {0,1}.
  Ref bce(Ref prob, const Tensor& target) {
    const Tensor& P = val(prob);
    require_same_shape(P, target, "bce");
    double loss = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      double p = clamp_prob(P.data[i]);
      loss -= target.data[i] * std::log(p) + (1 - target.data[i]) * std::log(1 - p);
    }
    loss /= double(P.size());
    Tensor out({1, 1});
    out.data[0] = loss;
    return push(std::move(out), [prob, target](Tape& t, Node& self) {
      const Tensor& P = t.val(prob);
      double g = self.grad.data[0] / double(P.size());
      for (std::size_t i = 0; i < P.size(); ++i) {
        double p = clamp_prob(P.data[i]);
        t.nodes_[prob].grad.data[i] +=
            g * (-target.data[i] / p + (1 - target.data[i]) / (1 - p));
      }
    }, prob);
  }

  // Weighted Bernoulli log-likelihood sum: sum_i w_i [t_i log p_i +
  // (1-t_i) log(1-p_i)]. Building block for the graph reconstruction terms.
  Ref bernoulli_ll(Ref prob, Tensor target, Tensor weight) {
    const Tensor& P = val(prob);
    require_same_shape(P, target, "bernoulli_ll");
    require_same_shape(P, weight, "bernoulli_ll(weight)");
    double ll = 0.0;
    for (std::size_t i = 0; i < P.size(); ++i) {
      double p = clamp_prob(P.data[i]);
      ll += weight.data[i] *
            (target.data[i] * std::log(p) + (1 - target.data[i]) * std::log(1 - p));
    }
    Tensor out({1, 1});
    out.data[0] = ll;
    return push(std::move(out),
                [prob, target = std::move(target),
                 weight = std::move(weight)](Tape& t, Node& self) {
                  const Tensor& P = t.val(prob);
                  double g = self.grad.data[0];
                  for (std::size_t i = 0; i < P.size(); ++i) {
                    double p = clamp_prob(P.data[i]);
                    t.nodes_[prob].grad.data[i] +=
                        g * weight.data[i] *
                        (target.data[i] / p - (1 - target.data[i]) / (1 - p));
                  }
                }, prob);
  }

  // Weighted categorical log-likelihood over rows of logits:
  // sum_i w_i log softmax(logits_i)[class_i]; rows with w=0 are skipped.
  Ref categorical_ll(Ref logits, std::vector<int> classes,
                     std::vector<double> weights) {
    const Tensor& Z = val(logits);
    std::size_t m = Z.rows(), c = Z.cols();
    if (classes.size() != m || weights.size() != m)
      throw Error(ErrorCode::ShapeError, "categorical_ll: row count");
    Tensor probs({m, c});
    double ll = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double mx = Z.at(i, 0);
      for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, Z.at(i, j));
      double sum = 0.0;
      for (std::size_t j = 0; j < c; ++j) sum += std::exp(Z.at(i, j) - mx);
      double logsum = std::log(sum) + mx;
      for (std::size_t j = 0; j < c; ++j)
        probs.at(i, j) = std::exp(Z.at(i, j) - logsum);
      if (weights[i] != 0.0) ll += weights[i] * (Z.at(i, classes[i]) - logsum);
    }
    Tensor out({1, 1});
    out.data[0] = ll;
    return push(std::move(out),
                [logits, classes = std::move(classes), weights = std::move(weights),
                 probs = std::move(probs), m, c](Tape& t, Node& self) {
                  double g = self.grad.data[0];
                  Tensor& gZ = t.nodes_[logits].grad;
                  for (std::size_t i = 0; i < m; ++i) {
                    if (weights[i] == 0.0) continue;
                    for (std::size_t j = 0; j < c; ++j)
                      gZ.at(i, j) += g * weights[i] *
                                     ((int(j) == classes[i] ? 1.0 : 0.0) -
                                      probs.at(i, j));
                  }
                }, logits);
  }

  // KL(N(mu, exp(logvar)) || N(0, I)) = 0.5 sum(mu^2 + e^lv - 1 - lv)
  Ref gaussian_kl(Ref mu, Ref logvar) {
    const Tensor& M = val(mu);
    const Tensor& L = val(logvar);
    require_same_shape(M, L, "gaussian_kl");
    double kl = 0.0;
    for (std::size_t i = 0; i < M.size(); ++i)
      kl += 0.5 * (M.data[i] * M.data[i] + std::exp(L.data[i]) - 1.0 - L.data[i]);
    Tensor out({1, 1});
    out.data[0] = kl;
    return push(std::move(out), [mu, logvar](Tape& t, Node& self) {
      const Tensor& M = t.val(mu);
      const Tensor& L = t.val(logvar);
      double g = self.grad.data[0];
      for (std::size_t i = 0; i < M.size(); ++i) {
        t.nodes_[mu].grad.data[i] += g * M.data[i];
        t.nodes_[logvar].grad.data[i] += g * 0.5 * (std::exp(L.data[i]) - 1.0);
      }
    }, mu, logvar);
  }

  // Scalar linear combination: sum_i coeff_i * term_i.
  Ref weighted_sum(const std::vector<std::pair<double, Ref>>& terms) {
    double v = 0.0;
    for (const auto& [c, r] : terms) v += c * scalar(r);
    Tensor out({1, 1});
    out.data[0] = v;
    Ref ref = push(std::move(out), nullptr, "");
    nodes_[ref].backward = [terms](Tape& t, Node& self) {
      for (const auto& [c, r] : terms)
        t.nodes_[r].grad.data[0] += c * self.grad.data[0];
    };
    for (const auto& [c, r] : terms) nodes_[ref].parents.push_back(r);
    return ref;
  }

  // Same buffer, new shape; gradient passes through untouched.
  Ref reshape(Ref a, std::vector<std::size_t> shape) {
    const Tensor& A = val(a);
    Tensor C;
    C.shape = std::move(shape);
    C.data = A.data;
    if (std::accumulate(C.shape.begin(), C.shape.end(), std::size_t{1},
                        std::multiplies<>()) != A.size())
      throw Error(ErrorCode::ShapeError, "reshape: element count");
    return push(std::move(C), [a](Tape& t, Node& self) {
      Tensor& gA = t.nodes_[a].grad;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        gA.data[i] += self.grad.data[i];
    }, a);
  }

  // Rows of a 2-D tensor, contiguous [begin, end).
  Ref slice_rows(Ref a, std::size_t begin, std::size_t end) {
    const Tensor& A = val(a);
    if (end > A.rows() || begin > end)
      throw Error(ErrorCode::ShapeError, "slice_rows: bad range");
    std::size_t n = A.cols();
    Tensor C({end - begin, n});
    std::copy(A.data.begin() + begin * n, A.data.begin() + end * n, C.data.begin());
    return push(std::move(C), [a, begin, n](Tape& t, Node& self) {
      Tensor& gA = t.nodes_[a].grad;
      for (std::size_t i = 0; i < self.grad.size(); ++i)
        gA.data[begin * n + i] += self.grad.data[i];
    }, a);
  }

  // -- backward ------------------------------------------------------------

  void backward(Ref loss) {
    for (auto& n : nodes_) std::fill(n.grad.data.begin(), n.grad.data.end(), 0.0);
    if (nodes_[loss].value.size() != 1)
      throw Error(ErrorCode::ShapeError, "backward from non-scalar");
    nodes_[loss].grad.data[0] = 1.0;
    for (int i = loss; i >= 0; --i)
      if (nodes_[i].backward) nodes_[i].backward(*this, nodes_[i]);
    // flush parameter gradients
    for (auto& n : nodes_) {
      if (!n.params) continue;
      Tensor& g = n.params->grad(n.param_name);
      for (std::size_t i = 0; i < g.size(); ++i) g.data[i] += n.grad.data[i];
    }
  }

  static double clamp_prob(double p) {
    const double lo = 1e-12;
    return std::min(std::max(p, lo), 1.0 - lo);
  }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::function<void(Tape&, Node&)> backward;
    std::vector<int> parents;
    ModelParams* params = nullptr;
    std::string param_name;
  };

  const Tensor& val(Ref r) const { return nodes_[r].value; }

  template <typename F>
  Ref push(Tensor value, F&& backward, int p0 = -1, int p1 = -1) {
    Node n;
    n.grad = Tensor(value.shape);
    n.value = std::move(value);
    if constexpr (!std::is_same_v<std::decay_t<F>, std::nullptr_t>)
      n.backward = std::forward<F>(backward);
    if (p0 >= 0) n.parents.push_back(p0);
    if (p1 >= 0) n.parents.push_back(p1);
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
  }

  Ref push(Tensor value, std::nullptr_t, const std::string& pname,
           ModelParams* params = nullptr) {
    Node n;
    n.grad = Tensor(value.shape);
    n.value = std::move(value);
    n.params = params;
    n.param_name = pname;
    nodes_.push_back(std::move(n));
    return static_cast<Ref>(nodes_.size() - 1);
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamState {
  std::map<std::string, Tensor> m, v;
  std::int64_t t = 0;
};

inline void adam_step(ModelParams& params, AdamState& state, double lr = 1e-3,
                      double beta1 = 0.9, double beta2 = 0.999,
                      double eps = 1e-8) {
  ++state.t;
  double bc1 = 1.0 - std::pow(beta1, double(state.t));
  double bc2 = 1.0 - std::pow(beta2, double(state.t));
  for (auto& [name, w] : params.values()) {
    const Tensor& g = params.grad(name);
    Tensor& m = state.m.try_emplace(name, Tensor(w.shape)).first->second;
    Tensor& v = state.v.try_emplace(name, Tensor(w.shape)).first->second;
    for (std::size_t i = 0; i < w.size(); ++i) {
      m.data[i] = beta1 * m.data[i] + (1 - beta1) * g.data[i];
      v.data[i] = beta2 * v.data[i] + (1 - beta2) * g.data[i] * g.data[i];
      double mh = m.data[i] / bc1;
      double vh = v.data[i] / bc2;
      w.data[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// `build` constructs a fresh forward graph on the given tape and returns the
// loss node. Central finite differences against the tape gradient; relative
// error |a-b| / max(1, |a|, |b|).
inline double grad_check(const std::function<Tape::Ref(Tape&)>& build,
                         ModelParams& params, double h = 1e-5) {
  params.zero_grads();
  {
    Tape tape;
    Tape::Ref loss = build(tape);
    tape.backward(loss);
  }
  auto eval = [&]() {
    Tape tape;
    return tape.scalar(build(tape));
  };
  double max_rel = 0.0;
  for (auto& [name, w] : params.values()) {
    const Tensor& g = params.grad(name);
    for (std::size_t i = 0; i < w.size(); ++i) {
      double orig = w.data[i];
      w.data[i] = orig + h;
      double up = eval();
      w.data[i] = orig - h;
      double dn = eval();
      w.data[i] = orig;
      double fd = (up - dn) / (2 * h);
      double rel = std::abs(fd - g.data[i]) /
                   std::max({1.0, std::abs(fd), std::abs(g.data[i])});
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian f64 payload plus a JSON index.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream bin(path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::IoError, "cannot write '" + path + "'");
  nlohmann::ordered_json index;
  index["format"] = "bms-checkpoint-v1";
  auto entries = nlohmann::ordered_json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : params.values()) {
    bin.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    entries.push_back({{"name", name}, {"shape", t.shape}, {"offset", offset}});
    offset += t.data.size() * sizeof(double);
  }
  index["params"] = std::move(entries);
  std::ofstream idx(path + ".json");
  if (!idx) throw Error(ErrorCode::IoError, "cannot write '" + path + ".json'");
  idx << index.dump(2) << "\n";
}

inline ModelParams load_checkpoint(const std::string& path) {
  std::ifstream idx(path + ".json");
  if (!idx) throw Error(ErrorCode::IoError, "cannot open '" + path + ".json'");
  nlohmann::json index;
  idx >> index;
  std::ifstream bin(path, std::ios::binary);
  if (!bin) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
  ModelParams params;
  for (const auto& e : index.at("params")) {
    Tensor t(e.at("shape").get<std::vector<std::size_t>>());
    bin.seekg(static_cast<std::streamoff>(e.at("offset").get<std::size_t>()));
    bin.read(reinterpret_cast<char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
    if (!bin) throw Error(ErrorCode::IoError, "truncated checkpoint");
    params.create(e.at("name").get<std::string>(), std::move(t));
  }
  return params;
}

// ---------------------------------------------------------------------------
// Deterministic RNG helpers (stdlib distributions are not portable bit-wise)
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ = splitmix64(state_ + counter_++);
    return state_;
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Box-Muller, deterministic
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0, u2;
    while (u1 == 0.0) u1 = uniform();
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * M_PI * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * M_PI * u2);
  }

  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
  std::uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Per-stage seed derivation from a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& stage) {
  std::uint64_t h = splitmix64(master);
  for (char c : stage) h = splitmix64(h ^ static_cast<std::uint64_t>(c));
  return h;
}

}  // namespace bms
