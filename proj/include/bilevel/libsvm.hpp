#pragma once

#include "bilevel/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bilevel {

/// A labelled dataset with dense features; rows of X are samples.
struct Dataset {
  Vec labels;  ///< Labels as read from the file.
  Mat X;

  Index samples() const { return X.rows(); }
  Index features() const { return X.cols(); }
};

/**
 * Parses LIBSVM sparse text: one sample per line, "label index:value ...",
 * with strictly increasing 1-based indices. Blank lines are skipped.
 *
 * @throws ParseError naming the 1-based line of the first malformed entry
 */
Dataset parse_libsvm(const std::string& text);

/// Reads and parses a file; throws InputError when it cannot be opened.
Dataset load_libsvm(const std::string& path);

/// Serializes with zero features omitted and values printed to round-trip precision.
std::string to_libsvm(const Dataset& data);

/// Writes to_libsvm(data) to a file.
void write_libsvm(const Dataset& data, const std::string& path);

/**
 * Linearly separable data with label noise: features uniform on [-1, 1]^q,
 * labels sign(w*^T x + b*) for a random unit w* and b* uniform on [-0.2, 0.2],
 * each label flipped with probability `noise`.
 */
Dataset synthetic_svm_dataset(Index samples, Index features, double noise, std::uint64_t seed);

/**
 * Hyperparameter tuning problem for a weighted SVM with logistic loss:
 * x = c in [0, 10]^n (slack weights), y = (w, b, xi) in [-1, 1]^{q+1} x [0, 20]^n,
 * upper objective the mean validation loss, lower objective the training loss
 * plus c^T xi, constraints 1 - xi_i - yhat_i (w^T x_i + b) <= 0.
 */
struct SvmInstance {
  BilevelProblem problem;
  Dataset train;  ///< Labels mapped to {-1, +1}.
  Dataset validation;
  std::vector<Index> train_rows;  ///< Rows of the source dataset, in order.
  std::vector<Index> validation_rows;

  /// Mean logistic loss on the validation set of the classifier (w, b) inside y.
  double validation_loss(const Vec& y) const;
  /// Fraction of validation samples classified correctly.
  double validation_accuracy(const Vec& y) const;
  /// Starting lower point: (w, b, xi) uniform on [0, 1].
  Vec random_start(std::uint64_t seed) const;
};

/**
 * Splits one fourth of the samples (chosen by the seeded stream) into the
 * validation set and builds the problem with its constants.
 *
 * @throws InputError when the labels do not form exactly two classes or a
 *         split is empty
 */
SvmInstance build_svm_problem(const Dataset& data, std::uint64_t seed);

}  // namespace bilevel
