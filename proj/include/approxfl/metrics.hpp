#pragma once

#include <string>
#include <vector>

namespace approxfl {

// Rows: true class, columns: predicted class.
std::vector<long> confusion_matrix(const std::vector<int>& predictions,
                                   const std::vector<int>& labels, int classes);

enum class AccuracyMode {
  Literal,  // TP_j / total sample count
  Recall,   // TP_j / class support
};

AccuracyMode accuracy_mode_from_name(const std::string& name);
const char* accuracy_mode_name(AccuracyMode m);

std::vector<double> per_class_accuracy(const std::vector<long>& confusion,
                                       int classes, AccuracyMode mode);

// Weighted mean of per-class accuracies, weights = class occurrence counts
// in the group's combined dataset.
double group_accuracy(const std::vector<double>& per_class,
                      const std::vector<long>& class_counts);

// Population variance across group accuracies; lower is fairer.
double fairness_variance(const std::vector<double>& group_accs);

double top1_accuracy(const std::vector<int>& predictions,
                     const std::vector<int>& labels);

}  // namespace approxfl
