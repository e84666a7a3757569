#include "dni/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace dni {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::size_t conv_output_length(std::size_t length, std::size_t kernel, const ConvSpec& spec) {
  if (spec.stride == 0 || spec.dilation == 0 || kernel == 0)
    throw std::invalid_argument("conv1d: stride, dilation and kernel must be positive");
  const std::size_t span = spec.dilation * (kernel - 1) + 1;
  const std::size_t padded = length + spec.pad_left + spec.pad_right;
  if (padded < span)
    throw std::invalid_argument("conv1d: input length " + std::to_string(length) +
                                " shorter than kernel span " + std::to_string(span));
  return (padded - span) / spec.stride + 1;
}

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using ArrMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

// ---------------------------------------------------------------- parameters

template <typename T>
Parameter<T>& ParameterSet<T>::add(std::string name, Shape shape) {
  if (find(name)) throw std::invalid_argument("duplicate parameter name " + name);
  return params_.emplace_back(std::move(name), std::move(shape));
}

template <typename T>
Parameter<T>* ParameterSet<T>::find(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
const Parameter<T>* ParameterSet<T>::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return &p;
  return nullptr;
}

template <typename T>
std::vector<Parameter<T>*> ParameterSet<T>::all() {
  std::vector<Parameter<T>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> ParameterSet<T>::all() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t ParameterSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : params_) p.grad.fill(T(0));
}

template <typename T>
void init_uniform(Parameter<T>& p, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : p.value.data()) v = static_cast<T>(dist(rng));
}

// ---------------------------------------------------------------- tape basics

template <typename T>
Var Tape<T>::push(Tensor<T> value, bool needs_grad, std::function<void(Tape&, std::size_t)> back) {
  for (const auto& v : value.data())
    if (!std::isfinite(static_cast<double>(v)))
      throw std::domain_error("non-finite value produced at tape node " + std::to_string(nodes_.size()));
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  if (needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
typename Tape<T>::Node& Tape<T>::node(Var v) {
  if (!v.valid() || v.id >= nodes_.size()) throw std::logic_error("tape: unknown variable");
  return nodes_[v.id];
}

template <typename T>
const typename Tape<T>::Node& Tape<T>::node(Var v) const {
  if (!v.valid() || v.id >= nodes_.size()) throw std::logic_error("tape: unknown variable");
  return nodes_[v.id];
}

template <typename T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return node(v).value;
}

template <typename T>
Tensor<T>& Tape<T>::grad_of(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor<T>(n.value.shape());
  return n.grad;
}

template <typename T>
Var Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false, {});
}

template <typename T>
Var Tape<T>::param(Parameter<T>& p) {
  if (!record_) return constant(p.value);
  Node n;
  n.value = p.value;
  n.param = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

template <typename T>
void Tape<T>::backward(Var loss) {
  if (nodes_.empty()) throw std::logic_error("backward called before any forward operation");
  auto& root = node(loss);
  if (root.value.size() != 1) throw std::logic_error("backward requires a scalar loss");
  if (root.needs_grad) {
    grad_of(loss.id)[0] = T(1);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.needs_grad || n.grad.empty()) continue;
      if (n.back) n.back(*this, i);
      if (n.param) {
        auto dst = n.param->grad.data();
        auto src = n.grad.data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
      }
    }
  }
  nodes_.clear();
}

// ---------------------------------------------------------------- convolution

template <typename T>
Var Tape<T>::conv1d(Var xv, Var wv, Var bv, const ConvSpec& spec) {
  const auto& x = value(xv);
  const auto& w = value(wv);
  require(x.rank() == 3 && w.rank() == 3, "conv1d: input and kernel must be rank 3");
  require(x.dim(1) == w.dim(1), "conv1d: input channels do not match kernel");
  const std::size_t batch = x.dim(0), cin = x.dim(1), tin = x.dim(2);
  const std::size_t cout = w.dim(0), k = w.dim(2);
  const std::size_t tout = conv_output_length(tin, k, spec);
  const bool has_bias = bv.valid();
  if (has_bias) require(value(bv).size() == cout, "conv1d: bias size does not match output channels");

  const std::size_t rows = cin * k;
  const std::size_t ncols = batch * tout;
  std::vector<T> cols(rows * ncols, T(0));
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < cin; ++c) {
      const T* src = x.ptr() + (b * cin + c) * tin;
      for (std::size_t j = 0; j < k; ++j) {
        T* dst = cols.data() + (c * k + j) * ncols + b * tout;
        const std::ptrdiff_t offset =
            static_cast<std::ptrdiff_t>(j * spec.dilation) - static_cast<std::ptrdiff_t>(spec.pad_left);
        for (std::size_t t = 0; t < tout; ++t) {
          const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t * spec.stride) + offset;
          if (s >= 0 && s < static_cast<std::ptrdiff_t>(tin)) dst[t] = src[s];
        }
      }
    }

  RowMat<T> y = ConstMatMap<T>(w.ptr(), cout, rows) * ConstMatMap<T>(cols.data(), rows, ncols);
  Tensor<T> out({batch, cout, tout});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < cout; ++o) {
      const T bias = has_bias ? value(bv)[o] : T(0);
      T* dst = out.ptr() + (b * cout + o) * tout;
      const T* src = y.data() + o * ncols + b * tout;
      for (std::size_t t = 0; t < tout; ++t) dst[t] = src[t] + bias;
    }

  const bool needs = node(xv).needs_grad || node(wv).needs_grad || (has_bias && node(bv).needs_grad);
  auto back = [xv, wv, bv, spec, batch, cin, tin, cout, k, tout, cols = std::move(cols)](Tape& tape,
                                                                                          std::size_t self) {
    const std::size_t rows = cin * k;
    const std::size_t ncols = batch * tout;
    const auto& g = tape.nodes_[self].grad;
    RowMat<T> dy(cout, ncols);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t o = 0; o < cout; ++o) {
        const T* src = g.ptr() + (b * cout + o) * tout;
        T* dst = dy.data() + o * ncols + b * tout;
        std::copy(src, src + tout, dst);
      }
    if (tape.nodes_[wv.id].needs_grad) {
      MatMap<T> gw(tape.grad_of(wv.id).ptr(), cout, rows);
      gw.noalias() += dy * ConstMatMap<T>(cols.data(), rows, ncols).transpose();
    }
    if (bv.valid() && tape.nodes_[bv.id].needs_grad) {
      auto& gb = tape.grad_of(bv.id);
      for (std::size_t o = 0; o < cout; ++o) {
        double acc = 0.0;
        for (std::size_t c = 0; c < ncols; ++c) acc += dy(o, c);
        gb[o] += static_cast<T>(acc);
      }
    }
    if (tape.nodes_[xv.id].needs_grad) {
      const auto& w = tape.nodes_[wv.id].value;
      RowMat<T> dcols = ConstMatMap<T>(w.ptr(), cout, rows).transpose() * dy;
      auto& gx = tape.grad_of(xv.id);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < cin; ++c) {
          T* dst = gx.ptr() + (b * cin + c) * tin;
          for (std::size_t j = 0; j < k; ++j) {
            const T* src = dcols.data() + (c * k + j) * ncols + b * tout;
            const std::ptrdiff_t offset = static_cast<std::ptrdiff_t>(j * spec.dilation) -
                                          static_cast<std::ptrdiff_t>(spec.pad_left);
            for (std::size_t t = 0; t < tout; ++t) {
              const std::ptrdiff_t s = static_cast<std::ptrdiff_t>(t * spec.stride) + offset;
              if (s >= 0 && s < static_cast<std::ptrdiff_t>(tin)) dst[s] += src[t];
            }
          }
        }
    }
  };
  return push(std::move(out), needs, std::move(back));
}

// ---------------------------------------------------------------- elementwise

template <typename T>
Var Tape<T>::add(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require(a.same_shape(b), "add: shape mismatch");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  const bool needs = node(av).needs_grad || node(bv).needs_grad;
  return push(std::move(out), needs, [av, bv](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    for (Var v : {av, bv}) {
      if (!tape.nodes_[v.id].needs_grad) continue;
      auto& gv = tape.grad_of(v.id);
      for (std::size_t i = 0; i < g.size(); ++i) gv[i] += g[i];
    }
  });
}

template <typename T>
Var Tape<T>::sub(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require(a.same_shape(b), "sub: shape mismatch");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  const bool needs = node(av).needs_grad || node(bv).needs_grad;
  return push(std::move(out), needs, [av, bv](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    if (tape.nodes_[av.id].needs_grad) {
      auto& ga = tape.grad_of(av.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tape.nodes_[bv.id].needs_grad) {
      auto& gb = tape.grad_of(bv.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var Tape<T>::mul(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require(a.same_shape(b), "mul: shape mismatch");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  const bool needs = node(av).needs_grad || node(bv).needs_grad;
  return push(std::move(out), needs, [av, bv](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    const auto& a = tape.nodes_[av.id].value;
    const auto& b = tape.nodes_[bv.id].value;
    if (tape.nodes_[av.id].needs_grad) {
      auto& ga = tape.grad_of(av.id);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
    }
    if (tape.nodes_[bv.id].needs_grad) {
      auto& gb = tape.grad_of(bv.id);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
    }
  });
}

template <typename T>
Var Tape<T>::scale(Var av, T factor) {
  const auto& a = value(av);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return push(std::move(out), node(av).needs_grad, [av, factor](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    auto& ga = tape.grad_of(av.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
  });
}

template <typename T>
Var Tape<T>::relu(Var av) {
  const auto& a = value(av);
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] > T(0) ? a[i] : T(0);
  return push(std::move(out), node(av).needs_grad, [av](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    const auto& a = tape.nodes_[av.id].value;
    auto& ga = tape.grad_of(av.id);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (a[i] > T(0)) ga[i] += g[i];
  });
}

template <typename T>
Var Tape<T>::tanh(Var av) {
  const auto& a = value(av);
  Tensor<T> out(a.shape());
  ArrMap<T>(out.ptr(), out.size()) = ConstArrMap<T>(a.ptr(), a.size()).tanh();
  return push(std::move(out), node(av).needs_grad, [av](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    const auto& y = tape.nodes_[self].value;
    auto& ga = tape.grad_of(av.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * (T(1) - y[i] * y[i]);
  });
}

template <typename T>
Var Tape<T>::sigmoid(Var av) {
  const auto& a = value(av);
  Tensor<T> out(a.shape());
  ArrMap<T>(out.ptr(), out.size()) = ConstArrMap<T>(a.ptr(), a.size()).logistic();
  return push(std::move(out), node(av).needs_grad, [av](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    const auto& y = tape.nodes_[self].value;
    auto& ga = tape.grad_of(av.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (T(1) - y[i]);
  });
}

// ---------------------------------------------------------------- shape ops

template <typename T>
Var Tape<T>::upsample_repeat(Var av, std::size_t factor) {
  require(factor >= 1, "upsample_repeat: factor must be >= 1");
  const auto& a = value(av);
  require(a.rank() == 3, "upsample_repeat: expects rank 3");
  const std::size_t rows = a.rows(), t = a.dim(2);
  Tensor<T> out({a.dim(0), a.dim(1), t * factor});
  for (std::size_t r = 0; r < rows; ++r) {
    auto src = a.row(r);
    auto dst = out.row(r);
    for (std::size_t i = 0; i < t; ++i)
      for (std::size_t f = 0; f < factor; ++f) dst[i * factor + f] = src[i];
  }
  return push(std::move(out), node(av).needs_grad, [av, factor](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    auto& ga = tape.grad_of(av.id);
    const std::size_t t = ga.dim(2);
    for (std::size_t r = 0; r < ga.rows(); ++r) {
      auto src = g.row(r);
      auto dst = ga.row(r);
      for (std::size_t i = 0; i < t; ++i) {
        T acc = T(0);
        for (std::size_t f = 0; f < factor; ++f) acc += src[i * factor + f];
        dst[i] += acc;
      }
    }
  });
}

template <typename T>
Var Tape<T>::concat_channels(Var av, Var bv) {
  const auto& a = value(av);
  const auto& b = value(bv);
  require(a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(2),
          "concat_channels: batch/time mismatch");
  const std::size_t batch = a.dim(0), ca = a.dim(1), cb = b.dim(1), t = a.dim(2);
  Tensor<T> out({batch, ca + cb, t});
  for (std::size_t n = 0; n < batch; ++n) {
    std::copy_n(a.ptr() + n * ca * t, ca * t, out.ptr() + n * (ca + cb) * t);
    std::copy_n(b.ptr() + n * cb * t, cb * t, out.ptr() + (n * (ca + cb) + ca) * t);
  }
  const bool needs = node(av).needs_grad || node(bv).needs_grad;
  return push(std::move(out), needs, [av, bv, batch, ca, cb, t](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    if (tape.nodes_[av.id].needs_grad) {
      auto& ga = tape.grad_of(av.id);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < ca * t; ++i) ga[n * ca * t + i] += g[n * (ca + cb) * t + i];
    }
    if (tape.nodes_[bv.id].needs_grad) {
      auto& gb = tape.grad_of(bv.id);
      for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < cb * t; ++i) gb[n * cb * t + i] += g[(n * (ca + cb) + ca) * t + i];
    }
  });
}

template <typename T>
Var Tape<T>::slice_channels(Var av, std::size_t begin, std::size_t count) {
  const auto& a = value(av);
  require(a.rank() == 3 && begin + count <= a.dim(1) && count > 0, "slice_channels: out of range");
  const std::size_t batch = a.dim(0), c = a.dim(1), t = a.dim(2);
  Tensor<T> out({batch, count, t});
  for (std::size_t n = 0; n < batch; ++n)
    std::copy_n(a.ptr() + (n * c + begin) * t, count * t, out.ptr() + n * count * t);
  return push(std::move(out), node(av).needs_grad, [av, begin, count, batch, c, t](Tape& tape, std::size_t self) {
    const auto& g = tape.nodes_[self].grad;
    auto& ga = tape.grad_of(av.id);
    for (std::size_t n = 0; n < batch; ++n)
      for (std::size_t i = 0; i < count * t; ++i) ga[(n * c + begin) * t + i] += g[n * count * t + i];
  });
}

// ---------------------------------------------------------------- reductions

template <typename T>
Var Tape<T>::sum(Var av) {
  const auto& a = value(av);
  double acc = 0.0;
  for (const auto& v : a.data()) acc += v;
  return push(Tensor<T>({1}, static_cast<T>(acc)), node(av).needs_grad, [av](Tape& tape, std::size_t self) {
    const T g = tape.nodes_[self].grad[0];
    for (auto& v : tape.grad_of(av.id).data()) v += g;
  });
}

template <typename T>
Var Tape<T>::mean(Var av) {
  const auto& a = value(av);
  double acc = 0.0;
  for (const auto& v : a.data()) acc += v;
  const double n = static_cast<double>(a.size());
  return push(Tensor<T>({1}, static_cast<T>(acc / n)), node(av).needs_grad, [av, n](Tape& tape, std::size_t self) {
    const T g = static_cast<T>(tape.nodes_[self].grad[0] / n);
    for (auto& v : tape.grad_of(av.id).data()) v += g;
  });
}

template <typename T>
Var Tape<T>::gaussian_nll(const Tensor<T>& target, Var mv, Var rv, const std::vector<std::uint8_t>& include) {
  const auto& mu = value(mv);
  const auto& raw = value(rv);
  require(target.same_shape(mu) && mu.same_shape(raw), "gaussian_nll: shape mismatch");
  const std::size_t rows = mu.rows(), t = mu.shape().back();
  require(include.empty() || include.size() == rows, "gaussian_nll: include mask has wrong length");
  for (const auto& v : target.data())
    if (!std::isfinite(static_cast<double>(v))) throw std::domain_error("gaussian_nll: non-finite target");

  const double log2pi = std::log(2.0 * std::numbers::pi);
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    if (!include.empty() && !include[r]) continue;
    for (std::size_t i = r * t; i < (r + 1) * t; ++i) {
      const double s2 = std::clamp(std::exp(static_cast<double>(raw[i])), kVarianceFloor, kVarianceCeil);
      const double d = static_cast<double>(target[i]) - static_cast<double>(mu[i]);
      acc += 0.5 * (log2pi + std::log(s2) + d * d / s2);
    }
    count += t;
  }
  const double loss = count ? acc / static_cast<double>(count) : 0.0;
  const bool needs = node(mv).needs_grad || node(rv).needs_grad;
  return push(Tensor<T>({1}, static_cast<T>(loss)), needs,
              [mv, rv, target, include, rows, t, count](Tape& tape, std::size_t self) {
                if (count == 0) return;
                const double g = static_cast<double>(tape.nodes_[self].grad[0]) / static_cast<double>(count);
                const auto& mu = tape.nodes_[mv.id].value;
                const auto& raw = tape.nodes_[rv.id].value;
                Tensor<T>* gm = tape.nodes_[mv.id].needs_grad ? &tape.grad_of(mv.id) : nullptr;
                Tensor<T>* gr = tape.nodes_[rv.id].needs_grad ? &tape.grad_of(rv.id) : nullptr;
                for (std::size_t r = 0; r < rows; ++r) {
                  if (!include.empty() && !include[r]) continue;
                  for (std::size_t i = r * t; i < (r + 1) * t; ++i) {
                    const double e = std::exp(static_cast<double>(raw[i]));
                    const double s2 = std::clamp(e, kVarianceFloor, kVarianceCeil);
                    const double d = static_cast<double>(target[i]) - static_cast<double>(mu[i]);
                    if (gm) (*gm)[i] += static_cast<T>(-g * d / s2);
                    if (gr && e > kVarianceFloor && e < kVarianceCeil)
                      (*gr)[i] += static_cast<T>(g * (0.5 - 0.5 * d * d / s2));
                  }
                }
              });
}

template <typename T>
Var Tape<T>::slowness(Var zv) {
  const auto& z = value(zv);
  require(z.rank() == 3, "slowness: expects rank 3");
  const std::size_t batch = z.dim(0), c = z.dim(1), t = z.dim(2);
  if (t < 2) return constant(Tensor<T>({1}));
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 1; i < t; ++i) {
        const double d = static_cast<double>(z.at(b, ch, i)) - z.at(b, ch, i - 1);
        acc += d * d;
      }
  const double n = static_cast<double>(batch * (t - 1));
  return push(Tensor<T>({1}, static_cast<T>(acc / n)), node(zv).needs_grad,
              [zv, batch, c, t, n](Tape& tape, std::size_t self) {
                const double g = tape.nodes_[self].grad[0] / n;
                const auto& z = tape.nodes_[zv.id].value;
                auto& gz = tape.grad_of(zv.id);
                for (std::size_t b = 0; b < batch; ++b)
                  for (std::size_t ch = 0; ch < c; ++ch)
                    for (std::size_t i = 1; i < t; ++i) {
                      const double d = static_cast<double>(z.at(b, ch, i)) - z.at(b, ch, i - 1);
                      gz.at(b, ch, i) += static_cast<T>(2.0 * g * d);
                      gz.at(b, ch, i - 1) -= static_cast<T>(2.0 * g * d);
                    }
              });
}

template <typename T>
Var Tape<T>::margin_penalty(Var zv, T margin) {
  const auto& z = value(zv);
  require(z.rank() == 3, "margin_penalty: expects rank 3");
  const std::size_t batch = z.dim(0), c = z.dim(1), t = z.dim(2);
  std::vector<std::uint8_t> active(batch * t, 0);
  double acc = 0.0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < t; ++i) {
      double norm2 = 0.0;
      for (std::size_t ch = 0; ch < c; ++ch) norm2 += static_cast<double>(z.at(b, ch, i)) * z.at(b, ch, i);
      if (norm2 > margin) {
        acc += norm2 - margin;
        active[b * t + i] = 1;
      }
    }
  const double n = static_cast<double>(batch * t);
  return push(Tensor<T>({1}, static_cast<T>(acc / n)), node(zv).needs_grad,
              [zv, batch, c, t, n, active = std::move(active)](Tape& tape, std::size_t self) {
                const double g = tape.nodes_[self].grad[0] / n;
                const auto& z = tape.nodes_[zv.id].value;
                auto& gz = tape.grad_of(zv.id);
                for (std::size_t b = 0; b < batch; ++b)
                  for (std::size_t i = 0; i < t; ++i) {
                    if (!active[b * t + i]) continue;
                    for (std::size_t ch = 0; ch < c; ++ch) gz.at(b, ch, i) += static_cast<T>(2.0 * g * z.at(b, ch, i));
                  }
              });
}

// ---------------------------------------------------------------- optimizer

template <typename T>
Adam<T>::Adam(std::vector<Parameter<T>*> params, AdamConfig<T> config)
    : params_(std::move(params)), config_(config) {
  for (auto* p : params_) {
    m_.emplace_back(p->value.shape());
    v_.emplace_back(p->value.shape());
  }
}

template <typename T>
void Adam<T>::step() {
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate, eps = config_.epsilon;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto w = params_[i]->value.data();
    auto g = params_[i]->grad.data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      w[j] = static_cast<T>(w[j] - lr * (mj / c1) / (std::sqrt(vj / c2) + eps));
    }
  }
}

template <typename T>
void Adam<T>::zero_grad() {
  for (auto* p : params_) p->grad.fill(T(0));
}

template struct Parameter<float>;
template struct Parameter<double>;
template class ParameterSet<float>;
template class ParameterSet<double>;
template class Tape<float>;
template class Tape<double>;
template class Adam<float>;
template class Adam<double>;
template void init_uniform<float>(Parameter<float>&, std::size_t, std::mt19937_64&);
template void init_uniform<double>(Parameter<double>&, std::size_t, std::mt19937_64&);

}  // namespace dni
