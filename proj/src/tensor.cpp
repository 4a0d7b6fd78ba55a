#include "crowdnav/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace crowdnav::ad {
namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                              shape_str(b));
}

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->on_tape()) continue;
    if (tape && tape != t->tape()) throw std::invalid_argument("tensors belong to different tapes");
    tape = t->tape();
  }
  return tape;
}

Tensor emit(Tape* tape, Matrix value, Tape::Backward fn) {
  if (!tape) return Tensor(std::move(value));
  return tape->record(std::move(value), std::move(fn));
}

// Broadcast kind for add/sub: 0 same shape, 1 b is a row broadcast over a.
int broadcast_kind(const char* op, const Matrix& a, const Matrix& b) {
  if (a.same_shape(b)) return 0;
  if (b.rows() == 1 && b.cols() == a.cols()) return 1;
  shape_error(op, a, b);
}

void accumulate_broadcast(Tape& tape, const Tensor& b, const Matrix& g, int kind, double sign) {
  if (!b.on_tape()) return;
  Matrix& gb = tape.grad_slot(b);
  if (kind == 0) {
    gb.add_scaled(g, sign);
    return;
  }
  const std::size_t cols = g.cols();
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double* row = g.ptr() + r * cols;
    double* out = gb.ptr();
    for (std::size_t c = 0; c < cols; ++c) out[c] += sign * row[c];
  }
}

template <typename F, typename D>
Tensor unary(const Tensor& a, F forward, D derivative) {
  const Matrix& x = a.value();
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = forward(x[i]);
  Tape* tape = common_tape({&a});
  if (!tape) return Tensor(std::move(y));
  auto out = std::make_shared<Matrix>(y);
  return tape->record(std::move(y), [a, out, derivative](const Matrix& g, Tape& t) {
    Matrix& ga = t.grad_slot(a);
    const Matrix& xv = a.value();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * derivative(xv[i], (*out)[i]);
  });
}

// In-place row softmax over the selected columns.
void softmax_rows(Matrix& m, const std::vector<bool>* mask) {
  const std::size_t cols = m.cols();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double* row = m.ptr() + r * cols;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      if (!mask || (*mask)[c]) peak = std::max(peak, row[c]);
    }
    if (peak == -std::numeric_limits<double>::infinity()) {
      std::fill(row, row + cols, 0.0);
      continue;
    }
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = (!mask || (*mask)[c]) ? std::exp(row[c] - peak) : 0.0;
      total += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= total;
  }
}

Tensor softmax_impl(const Tensor& a, const std::vector<bool>* mask) {
  Matrix y = a.value();
  softmax_rows(y, mask);
  Tape* tape = common_tape({&a});
  if (!tape) return Tensor(std::move(y));
  auto out = std::make_shared<Matrix>(y);
  return tape->record(std::move(y), [a, out](const Matrix& g, Tape& t) {
    Matrix& ga = t.grad_slot(a);
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < g.rows(); ++r) {
      const double* gy = g.ptr() + r * cols;
      const double* yy = out->ptr() + r * cols;
      double inner = 0.0;
      for (std::size_t c = 0; c < cols; ++c) inner += gy[c] * yy[c];
      double* gx = ga.ptr() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) gx[c] += yy[c] * (gy[c] - inner);
    }
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) throw std::invalid_argument("matrix data length mismatch");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::row(std::initializer_list<double> values) {
  return Matrix(1, values.size(), std::vector<double>(values));
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::add_scaled(const Matrix& other, double scale) {
  if (!same_shape(other)) shape_error("add_scaled", *this, other);
  const double* src = other.ptr();
  double* dst = ptr();
  const std::size_t n = data_.size();
  if (scale == 1.0) {
    for (std::size_t i = 0; i < n; ++i) dst[i] += src[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) dst[i] += scale * src[i];
  }
}

// ---------------------------------------------------------------------------
// Tensor and Tape

Tensor::Tensor(Matrix value) : value_(std::make_shared<const Matrix>(std::move(value))) {}

Tensor::Tensor(std::shared_ptr<const Matrix> value) : value_(std::move(value)) {}

double Tensor::item() const {
  if (rows() != 1 || cols() != 1) throw std::invalid_argument("item() needs a 1x1 tensor");
  return (*value_)(0, 0);
}

Tensor Tape::variable(Matrix value) {
  return variable(std::make_shared<const Matrix>(std::move(value)));
}

Tensor Tape::variable(std::shared_ptr<const Matrix> value) {
  Tensor t(std::move(value));
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back({t.rows(), t.cols(), nullptr});
  return t;
}

Tensor Tape::record(Matrix value, Backward fn) {
  Tensor t(std::move(value));
  t.tape_ = this;
  t.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back({t.rows(), t.cols(), std::move(fn)});
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.on_tape() || loss.tape() != this) {
    throw std::invalid_argument("backward() needs a loss recorded on this tape");
  }
  if (loss.rows() != 1 || loss.cols() != 1) throw std::invalid_argument("loss must be 1x1");

  grads_.assign(nodes_.size(), Matrix());
  grads_[static_cast<std::size_t>(loss.node())] = Matrix(1, 1, 1.0);
  for (int i = loss.node(); i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    if (grads_[idx].size() == 0 || !nodes_[idx].backward) continue;
    nodes_[idx].backward(grads_[idx], *this);
  }
}

Matrix Tape::grad(const Tensor& t) const {
  if (t.on_tape() && t.tape() == this) {
    const auto idx = static_cast<std::size_t>(t.node());
    if (idx < grads_.size() && grads_[idx].size() != 0) return grads_[idx];
  }
  return Matrix(t.rows(), t.cols());
}

Matrix& Tape::grad_slot(const Tensor& t) {
  const auto idx = static_cast<std::size_t>(t.node());
  Matrix& slot = grads_[idx];
  if (slot.size() == 0) slot = Matrix(nodes_[idx].rows, nodes_[idx].cols);
  return slot;
}

void Tape::clear() {
  nodes_.clear();
  grads_.clear();
}

// ---------------------------------------------------------------------------
// Ops

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  if (x.cols() != w.rows()) shape_error("matmul", x, w);
  const std::size_t n = x.rows();
  const std::size_t k_dim = x.cols();
  const std::size_t m = w.cols();
  Matrix y(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* out = y.ptr() + i * m;
    for (std::size_t k = 0; k < k_dim; ++k) {
      const double xik = x(i, k);
      if (xik == 0.0) continue;
      const double* wrow = w.ptr() + k * m;
      for (std::size_t j = 0; j < m; ++j) out[j] += xik * wrow[j];
    }
  }
  return emit(common_tape({&a, &b}), std::move(y), [a, b](const Matrix& g, Tape& t) {
    const Matrix& xv = a.value();
    const Matrix& wv = b.value();
    const std::size_t n = xv.rows();
    const std::size_t kd = xv.cols();
    const std::size_t m = wv.cols();
    if (a.on_tape()) {
      // dX = G W^T
      Matrix& gx = t.grad_slot(a);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.ptr() + i * m;
        for (std::size_t k = 0; k < kd; ++k) {
          const double* wrow = wv.ptr() + k * m;
          double acc = 0.0;
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * wrow[j];
          gx(i, k) += acc;
        }
      }
    }
    if (b.on_tape()) {
      // dW = X^T G
      Matrix& gw = t.grad_slot(b);
      for (std::size_t i = 0; i < n; ++i) {
        const double* grow = g.ptr() + i * m;
        for (std::size_t k = 0; k < kd; ++k) {
          const double xik = xv(i, k);
          if (xik == 0.0) continue;
          double* out = gw.ptr() + k * m;
          for (std::size_t j = 0; j < m; ++j) out[j] += xik * grow[j];
        }
      }
    }
  });
}

namespace {

Tensor add_sub(const char* op, const Tensor& a, const Tensor& b, double sign) {
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  const int kind = broadcast_kind(op, x, z);
  Matrix y = x;
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* out = y.ptr() + r * cols;
    const double* src = z.ptr() + (kind == 0 ? r * cols : 0);
    for (std::size_t c = 0; c < cols; ++c) out[c] += sign * src[c];
  }
  return emit(common_tape({&a, &b}), std::move(y), [a, b, kind, sign](const Matrix& g, Tape& t) {
    if (a.on_tape()) t.grad_slot(a).add_scaled(g);
    accumulate_broadcast(t, b, g, kind, sign);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_sub("add", a, b, 1.0); }

Tensor sub(const Tensor& a, const Tensor& b) { return add_sub("sub", a, b, -1.0); }

Tensor scalar_mul(const Tensor& a, double s) {
  Matrix y = a.value();
  for (double& v : y.data()) v *= s;
  return emit(common_tape({&a}), std::move(y),
              [a, s](const Matrix& g, Tape& t) { t.grad_slot(a).add_scaled(g, s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  Matrix y = a.value();
  for (double& v : y.data()) v += s;
  return emit(common_tape({&a}), std::move(y),
              [a](const Matrix& g, Tape& t) { t.grad_slot(a).add_scaled(g); });
}

Tensor elementwise_mul(const Tensor& a, const Tensor& b) {
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  if (!x.same_shape(z)) shape_error("elementwise_mul", x, z);
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * z[i];
  return emit(common_tape({&a, &b}), std::move(y), [a, b](const Matrix& g, Tape& t) {
    if (a.on_tape()) {
      Matrix& ga = t.grad_slot(a);
      const Matrix& zv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * zv[i];
    }
    if (b.on_tape()) {
      Matrix& gb = t.grad_slot(b);
      const Matrix& xv = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * xv[i];
    }
  });
}

Tensor scale_rows(const Tensor& a, std::span<const double> factors) {
  const Matrix& x = a.value();
  if (factors.size() != x.rows()) {
    throw std::invalid_argument("scale_rows: need one factor per row");
  }
  std::vector<double> f(factors.begin(), factors.end());
  Matrix y = x;
  const std::size_t cols = x.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) y(r, c) *= f[r];
  }
  return emit(common_tape({&a}), std::move(y), [a, f = std::move(f)](const Matrix& g, Tape& t) {
    Matrix& ga = t.grad_slot(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += g(r, c) * f[r];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  Tape* tape = nullptr;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_error("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
    Tape* pt = common_tape({&p});
    if (pt) {
      if (tape && tape != pt) throw std::invalid_argument("tensors belong to different tapes");
      tape = pt;
    }
  }
  Matrix y(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) y(r, offset + c) = p(r, c);
    }
    offset += p.cols();
  }
  std::vector<Tensor> inputs(parts.begin(), parts.end());
  return emit(tape, std::move(y), [inputs = std::move(inputs)](const Matrix& g, Tape& t) {
    std::size_t off = 0;
    for (const auto& p : inputs) {
      if (p.on_tape()) {
        Matrix& gp = t.grad_slot(p);
        for (std::size_t r = 0; r < g.rows(); ++r) {
          for (std::size_t c = 0; c < p.cols(); ++c) gp(r, c) += g(r, off + c);
        }
      }
      off += p.cols();
    }
  });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  const Matrix& x = a.value();
  if (begin + count > x.cols()) throw std::invalid_argument("slice_cols: range out of bounds");
  Matrix y(x.rows(), count);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < count; ++c) y(r, c) = x(r, begin + c);
  }
  return emit(common_tape({&a}), std::move(y), [a, begin](const Matrix& g, Tape& t) {
    Matrix& ga = t.grad_slot(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, begin + c) += g(r, c);
    }
  });
}

Tensor transpose(const Tensor& a) {
  const Matrix& x = a.value();
  Matrix y(x.cols(), x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) y(c, r) = x(r, c);
  }
  return emit(common_tape({&a}), std::move(y), [a](const Matrix& g, Tape& t) {
    Matrix& ga = t.grad_slot(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      for (std::size_t c = 0; c < g.cols(); ++c) ga(c, r) += g(r, c);
    }
  });
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  const Matrix& x = a.value();
  const Matrix& z = b.value();
  if (!x.same_shape(z)) shape_error("minimum", x, z);
  Matrix y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::min(x[i], z[i]);
  // Ties route the gradient to `a`.
  return emit(common_tape({&a, &b}), std::move(y), [a, b](const Matrix& g, Tape& t) {
    const Matrix& xv = a.value();
    const Matrix& zv = b.value();
    for (std::size_t i = 0; i < g.size(); ++i) {
      const bool pick_a = xv[i] <= zv[i];
      if (pick_a && a.on_tape()) t.grad_slot(a)[i] += g[i];
      if (!pick_a && b.on_tape()) t.grad_slot(b)[i] += g[i];
    }
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor row_softmax(const Tensor& a) { return softmax_impl(a, nullptr); }

Tensor masked_row_softmax(const Tensor& a, const std::vector<bool>& mask) {
  if (mask.size() != a.cols()) {
    throw std::invalid_argument("masked_row_softmax: mask length must equal column count");
  }
  return softmax_impl(a, &mask);
}

Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  return emit(common_tape({&a}), Matrix::scalar(total), [a](const Matrix& g, Tape& t) {
    Matrix& ga = t.grad_slot(a);
    const double s = g[0];
    for (double& v : ga.data()) v += s;
  });
}

Tensor mean(const Tensor& a) {
  const auto n = static_cast<double>(a.value().size());
  if (n == 0.0) throw std::invalid_argument("mean of an empty tensor");
  return scalar_mul(sum(a), 1.0 / n);
}

// ---------------------------------------------------------------------------
// GRU

Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p) {
  if (x.rows() != 1 || h_prev.rows() != 1) throw std::invalid_argument("gru_cell expects rows");
  const Tensor z = sigmoid(add(add(matmul(x, p.w_z), matmul(h_prev, p.u_z)), p.b_z));
  const Tensor r = sigmoid(add(add(matmul(x, p.w_r), matmul(h_prev, p.u_r)), p.b_r));
  const Tensor candidate =
      tanh(add(add(matmul(x, p.w_h), matmul(elementwise_mul(r, h_prev), p.u_h)), p.b_h));
  // (1 - z) * h_prev + z * candidate
  const Tensor keep = add_scalar(scalar_mul(z, -1.0), 1.0);
  return add(elementwise_mul(keep, h_prev), elementwise_mul(z, candidate));
}

// ---------------------------------------------------------------------------
// ParameterSet

std::size_t ParameterSet::add(std::string name, Matrix value) {
  for (const auto& n : names_) {
    if (n == name) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::make_shared<Matrix>(std::move(value)));
  return values_.size() - 1;
}

std::size_t ParameterSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw std::out_of_range("no parameter named '" + name + "'");
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += v->size();
  return n;
}

std::vector<Tensor> ParameterSet::bind(Tape* tape) const {
  std::vector<Tensor> out;
  out.reserve(values_.size());
  for (const auto& v : values_) {
    std::shared_ptr<const Matrix> view = v;
    out.push_back(tape ? tape->variable(view) : Tensor(view));
  }
  return out;
}

ParameterSet ParameterSet::clone() const {
  ParameterSet copy;
  for (std::size_t i = 0; i < values_.size(); ++i) copy.add(names_[i], *values_[i]);
  return copy;
}

bool ParameterSet::values_equal(const ParameterSet& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (names_[i] != other.names_[i] || !(*values_[i] == *other.values_[i])) return false;
  }
  return true;
}

void ParameterSet::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out << "crowdnav-params " << kCheckpointVersion << "\n" << values_.size() << "\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const Matrix& m = *values_[i];
    out << names_[i] << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (std::size_t j = 0; j < m.size(); ++j) out << (j ? " " : "") << m[j];
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

void ParameterSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  std::string magic;
  int version = 0;
  std::size_t count = 0;
  in >> magic >> version >> count;
  if (magic != "crowdnav-params" || version != kCheckpointVersion) {
    throw std::runtime_error("unrecognized checkpoint header in " + path.string());
  }
  if (count != values_.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(count) + " parameters, expected " +
                             std::to_string(values_.size()));
  }
  // Parse everything first so a bad file leaves the parameters untouched.
  std::vector<std::pair<std::size_t, Matrix>> loaded;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    in >> name >> rows >> cols;
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    const std::size_t idx = index_of(name);
    const Matrix& current = *values_[idx];
    if (current.rows() != rows || current.cols() != cols) {
      throw std::runtime_error("shape mismatch for parameter '" + name + "'");
    }
    Matrix m(rows, cols);
    for (std::size_t j = 0; j < m.size(); ++j) {
      std::string token;
      in >> token;
      m[j] = std::strtod(token.c_str(), nullptr);
    }
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    loaded.emplace_back(idx, std::move(m));
  }
  for (auto& [idx, m] : loaded) *values_[idx] = std::move(m);
}

}  // namespace crowdnav::ad
