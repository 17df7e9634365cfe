#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace w2s {

/// counts[true][predicted].
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int classes = 9);

    int classes() const { return classes_; }
    std::int64_t operator()(int truth, int predicted) const { return counts_[index(truth, predicted)]; }
    std::int64_t& operator()(int truth, int predicted) { return counts_[index(truth, predicted)]; }

    void add(int truth, int predicted);
    std::int64_t total() const;
    std::int64_t trace() const;
    std::int64_t row_sum(int truth) const;
    std::int64_t col_sum(int predicted) const;

    /// Builds a matrix from rows of counts; throws InputError unless square.
    static ConfusionMatrix from_rows(const std::vector<std::vector<std::int64_t>>& rows);

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::size_t index(int truth, int predicted) const;

    int classes_;
    std::vector<std::int64_t> counts_;
};

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions, int classes = 9);

/// A ratio whose denominator may be zero; empty means undefined.
using MaybeRatio = std::optional<double>;

struct ClassStats {
    MaybeRatio accuracy;  // one-vs-all: (TP + TN) / total
    MaybeRatio recall;
    MaybeRatio precision;
    MaybeRatio f1;
    std::int64_t support = 0;  // row sum
};

struct MetricsReport {
    MaybeRatio overall_accuracy;
    std::vector<ClassStats> per_class;
    std::int64_t total = 0;
};

MetricsReport per_class_stats(const ConfusionMatrix& cm);

/// Harmonic mean; undefined if either input is undefined or both are zero.
MaybeRatio f1_score(MaybeRatio precision, MaybeRatio recall);

/// Key-value report:
///   overall_accuracy: <v>
///   total: <n>
///   <Class>.support: <n>
///   <Class>.accuracy / .recall / .precision / .f1: <v or null>
/// Class names come from `names` (defaults to class indices).
void write_metrics_report(std::ostream& os, const MetricsReport& report, const std::vector<std::string>& names = {});

/// CSV with a header row "true\pred,<names...>" and one row per true class.
void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm, const std::vector<std::string>& names = {});

/// Aligned table for terminals; undefined cells print as an em dash.
void print_metrics_table(std::ostream& os, const MetricsReport& report, const std::vector<std::string>& names = {});

}  // namespace w2s
