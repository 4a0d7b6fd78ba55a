#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace crowdnav::ad {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix row(std::initializer_list<double> values);
  static Matrix scalar(double v) { return Matrix(1, 1, v); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  void fill(double v);
  /// this += scale * other, same shape.
  void add_scaled(const Matrix& other, double scale = 1.0);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

class Tape;

/// A matrix value, optionally attached to a gradient tape. Tensors without a
/// tape are constants; ops on constants record nothing.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value);
  explicit Tensor(std::shared_ptr<const Matrix> value);

  std::size_t rows() const { return value_->rows(); }
  std::size_t cols() const { return value_->cols(); }
  const Matrix& value() const { return *value_; }
  const std::shared_ptr<const Matrix>& shared_value() const { return value_; }
  double operator()(std::size_t r, std::size_t c) const { return (*value_)(r, c); }
  /// Value of a 1x1 tensor.
  double item() const;

  Tape* tape() const { return tape_; }
  int node() const { return node_; }
  bool on_tape() const { return node_ >= 0; }

 private:
  friend class Tape;
  std::shared_ptr<const Matrix> value_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

/// Records operations in execution order; backward() replays them in reverse.
/// A tape belongs to the thread that created it.
class Tape {
 public:
  using Backward = std::function<void(const Matrix& grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf node whose gradient is wanted.
  Tensor variable(Matrix value);
  Tensor variable(std::shared_ptr<const Matrix> value);

  /// Records an op output. `fn` receives d(loss)/d(output) and accumulates
  /// into its inputs through accumulate().
  Tensor record(Matrix value, Backward fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates. Throws std::invalid_argument
  /// unless `loss` is a 1x1 tensor recorded on this tape.
  void backward(const Tensor& loss);

  /// Gradient of the last backward() w.r.t. `t`; zeros when `t` was not reached.
  Matrix grad(const Tensor& t) const;

  /// Gradient buffer for a node, allocated on first use.
  Matrix& grad_slot(const Tensor& t);

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    std::size_t rows;
    std::size_t cols;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::vector<Matrix> grads_;
};

// ---------------------------------------------------------------------------
// Ops. Shape mismatches throw std::invalid_argument at call time.

Tensor matmul(const Tensor& a, const Tensor& b);
/// Elementwise a + b; b may also be a single row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise a - b with the same broadcasting as add().
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor elementwise_mul(const Tensor& a, const Tensor& b);
/// Multiplies row r by factors[r]; factors are constants.
Tensor scale_rows(const Tensor& a, std::span<const double> factors);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor square(const Tensor& a);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor row_softmax(const Tensor& a);
/// Softmax over the columns with mask[c] == true; masked columns get exactly
/// zero weight and a row with no unmasked column is all zeros.
Tensor masked_row_softmax(const Tensor& a, const std::vector<bool>& mask);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scalar_mul(a, s); }

// ---------------------------------------------------------------------------
// Gated recurrent unit.

struct GruParams {
  Tensor w_z, u_z, b_z;
  Tensor w_r, u_r, b_r;
  Tensor w_h, u_h, b_h;
};

/// z = sigmoid(x W_z + h U_z + b_z), r = sigmoid(x W_r + h U_r + b_r),
/// h~ = tanh(x W_h + (r*h) U_h + b_h), h' = (1 - z) * h + z * h~.
Tensor gru_cell(const Tensor& x, const Tensor& h_prev, const GruParams& p);

// ---------------------------------------------------------------------------
// Parameters and checkpoints.

/// Named trainable matrices. Values live behind shared pointers so binding
/// them into a tape or a constant graph does not copy.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Matrix& value(std::size_t i) const { return *values_.at(i); }
  Matrix& mutable_value(std::size_t i) { return *values_.at(i); }
  std::size_t index_of(const std::string& name) const;
  std::size_t scalar_count() const;

  /// One tensor per parameter: tape variables when `tape` is given, otherwise constants.
  std::vector<Tensor> bind(Tape* tape) const;

  /// Deep copy (independent storage).
  ParameterSet clone() const;

  void save(const std::filesystem::path& path) const;
  /// Loads values into existing parameters; names and shapes must match.
  void load(const std::filesystem::path& path);

  bool values_equal(const ParameterSet& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::shared_ptr<Matrix>> values_;
};

/// Checkpoint text format, version 1:
///   crowdnav-params 1
///   <count>
///   then per parameter: "<name> <rows> <cols>" followed by a line of
///   rows*cols values in row-major order, printed with 17 significant digits.
inline constexpr int kCheckpointVersion = 1;

}  // namespace crowdnav::ad
