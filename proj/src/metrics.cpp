#include "approxfl/metrics.hpp"

#include <stdexcept>

namespace approxfl {

std::vector<long> confusion_matrix(const std::vector<int>& predictions,
                                   const std::vector<int>& labels, int classes) {
  if (predictions.size() != labels.size()) {
    throw std::invalid_argument("predictions and labels differ in length");
  }
  std::vector<long> m(static_cast<std::size_t>(classes) * classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i], p = predictions[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) {
      throw std::invalid_argument("class index out of range");
    }
    ++m[static_cast<std::size_t>(t) * classes + p];
  }
  return m;
}

AccuracyMode accuracy_mode_from_name(const std::string& name) {
  if (name == "literal") return AccuracyMode::Literal;
  if (name == "recall") return AccuracyMode::Recall;
  throw std::invalid_argument("unknown accuracy mode: " + name);
}

const char* accuracy_mode_name(AccuracyMode m) {
  return m == AccuracyMode::Literal ? "literal" : "recall";
}

std::vector<double> per_class_accuracy(const std::vector<long>& confusion,
                                       int classes, AccuracyMode mode) {
  if (confusion.size() != static_cast<std::size_t>(classes) * classes) {
    throw std::invalid_argument("confusion matrix size mismatch");
  }
  long total = 0;
  for (long v : confusion) total += v;
  std::vector<double> acc(classes, 0.0);
  for (int j = 0; j < classes; ++j) {
    const long tp = confusion[static_cast<std::size_t>(j) * classes + j];
    if (mode == AccuracyMode::Literal) {
      acc[j] = total > 0 ? static_cast<double>(tp) / total : 0.0;
    } else {
      long support = 0;
      for (int p = 0; p < classes; ++p) {
        support += confusion[static_cast<std::size_t>(j) * classes + p];
      }
      acc[j] = support > 0 ? static_cast<double>(tp) / support : 0.0;
    }
  }
  return acc;
}

double group_accuracy(const std::vector<double>& per_class,
                      const std::vector<long>& class_counts) {
  if (per_class.size() != class_counts.size()) {
    throw std::invalid_argument("per-class accuracies and counts differ in length");
  }
  double num = 0.0;
  long denom = 0;
  for (std::size_t j = 0; j < per_class.size(); ++j) {
    if (class_counts[j] < 0) throw std::invalid_argument("negative class count");
    num += static_cast<double>(class_counts[j]) * per_class[j];
    denom += class_counts[j];
  }
  return denom > 0 ? num / denom : 0.0;
}

double fairness_variance(const std::vector<double>& group_accs) {
  if (group_accs.empty()) return 0.0;
  double mean = 0.0;
  for (double a : group_accs) mean += a;
  mean /= static_cast<double>(group_accs.size());
  double var = 0.0;
  for (double a : group_accs) var += (a - mean) * (a - mean);
  return var / static_cast<double>(group_accs.size());
}

double top1_accuracy(const std::vector<int>& predictions,
                     const std::vector<int>& labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw std::invalid_argument("predictions and labels must match and be non-empty");
  }
  long hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace approxfl
