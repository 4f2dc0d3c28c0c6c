#ifndef PREVCAL_TYPES_HPP
#define PREVCAL_TYPES_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace prevcal {

using Vec = std::vector<double>;
using IVec = std::vector<long long>;

// Dense row-major matrix, sized for class counts (C <= a few dozen).
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return a[i * cols + j];
  }

  static Mat identity(std::size_t n) {
    Mat m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

struct IMat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<long long> a;

  IMat() = default;
  IMat(std::size_t r, std::size_t c, long long fill = 0)
      : rows(r), cols(c), a(r * c, fill) {}

  long long& operator()(std::size_t i, std::size_t j) {
    return a[i * cols + j];
  }
  long long operator()(std::size_t i, std::size_t j) const {
    return a[i * cols + j];
  }
};

// Ordered class labels with label -> index lookup. Ordering is fixed by the
// declaration order and every matrix/vector in the artifact follows it.
class ClassLabelMap {
 public:
  explicit ClassLabelMap(std::vector<std::string> labels);

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::string& label(std::size_t i) const { return labels_[i]; }
  // Throws InputError for labels outside the class set.
  std::size_t index(const std::string& label) const;
  bool contains(const std::string& label) const;

 private:
  std::vector<std::string> labels_;
};

// Probability vector on the C-simplex (each entry >= 0, sum == 1 to 1e-10).
struct ClassProbs {
  Vec values;

  static ClassProbs checked(Vec values);
  std::size_t size() const { return values.size(); }
};

// Row-stochastic matrix m[i][j] = P(predicted class j | true class i).
struct MisclassMatrix {
  Mat m;

  static MisclassMatrix checked(Mat m);
  std::size_t size() const { return m.rows; }
};

// Counts of (true class i, predicted class j) pairs on the labeled set.
struct TransferErrorMatrix {
  IMat t;
  IVec row_sums;     // n_i
  long long total;   // n

  static TransferErrorMatrix checked(IMat t);
  static TransferErrorMatrix zeros(std::size_t c);
  std::size_t size() const { return t.rows; }
};

// Predicted-class counts on the unlabeled set.
struct PredictionCounts {
  IVec v;
  long long total;  // N

  static PredictionCounts checked(IVec v);
  std::size_t size() const { return v.size(); }
};

struct Hyperparams {
  double epsilon = 1e-3;     // prior smoothing for misclassification rows
  double delta = 1.0;        // Dirichlet mass on the class probabilities
  double alpha_gamma = 1.0;  // Gamma prior shape on the shrinkage weights
  double beta_gamma = 1.0;   // Gamma prior rate

  void validate() const;
};

}  // namespace prevcal

#endif
