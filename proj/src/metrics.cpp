#include "w2s/metrics.hpp"

#include <iomanip>
#include <numeric>
#include <sstream>

#include "w2s/errors.hpp"

namespace w2s {

namespace {

std::string class_name(const std::vector<std::string>& names, int c) {
    return c < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(c)] : std::to_string(c);
}

MaybeRatio ratio(std::int64_t num, std::int64_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

std::string format(MaybeRatio r, const char* missing) {
    if (!r) return missing;
    std::ostringstream os;
    os << std::setprecision(6) << *r;
    return os.str();
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(int classes) : classes_(classes) {
    if (classes <= 0) throw InputError("confusion matrix needs at least one class");
    counts_.assign(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0);
}

std::size_t ConfusionMatrix::index(int truth, int predicted) const {
    if (truth < 0 || truth >= classes_ || predicted < 0 || predicted >= classes_) {
        throw InputError("class index out of range [0," + std::to_string(classes_) + ")");
    }
    return static_cast<std::size_t>(truth) * static_cast<std::size_t>(classes_) + static_cast<std::size_t>(predicted);
}

void ConfusionMatrix::add(int truth, int predicted) { ++counts_[index(truth, predicted)]; }

std::int64_t ConfusionMatrix::total() const { return std::accumulate(counts_.begin(), counts_.end(), std::int64_t{0}); }

std::int64_t ConfusionMatrix::trace() const {
    std::int64_t t = 0;
    for (int c = 0; c < classes_; ++c) t += (*this)(c, c);
    return t;
}

std::int64_t ConfusionMatrix::row_sum(int truth) const {
    std::int64_t s = 0;
    for (int p = 0; p < classes_; ++p) s += (*this)(truth, p);
    return s;
}

std::int64_t ConfusionMatrix::col_sum(int predicted) const {
    std::int64_t s = 0;
    for (int t = 0; t < classes_; ++t) s += (*this)(t, predicted);
    return s;
}

ConfusionMatrix ConfusionMatrix::from_rows(const std::vector<std::vector<std::int64_t>>& rows) {
    ConfusionMatrix cm(static_cast<int>(rows.size()));
    for (std::size_t t = 0; t < rows.size(); ++t) {
        if (rows[t].size() != rows.size()) throw InputError("confusion matrix rows must be square");
        for (std::size_t p = 0; p < rows.size(); ++p) {
            if (rows[t][p] < 0) throw InputError("confusion counts must be non-negative");
            cm(static_cast<int>(t), static_cast<int>(p)) = rows[t][p];
        }
    }
    return cm;
}

ConfusionMatrix confusion(std::span<const int> labels, std::span<const int> predictions, int classes) {
    if (labels.size() != predictions.size()) {
        throw InputError("labels (" + std::to_string(labels.size()) + ") and predictions (" +
                         std::to_string(predictions.size()) + ") differ in length");
    }
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < labels.size(); ++i) cm.add(labels[i], predictions[i]);
    return cm;
}

MaybeRatio f1_score(MaybeRatio precision, MaybeRatio recall) {
    if (!precision || !recall) return std::nullopt;
    const double sum = *precision + *recall;
    if (sum == 0.0) return std::nullopt;
    return 2.0 * *precision * *recall / sum;
}

MetricsReport per_class_stats(const ConfusionMatrix& cm) {
    MetricsReport report;
    report.total = cm.total();
    report.overall_accuracy = ratio(cm.trace(), report.total);
    for (int c = 0; c < cm.classes(); ++c) {
        ClassStats s;
        const std::int64_t tp = cm(c, c);
        const std::int64_t row = cm.row_sum(c);
        const std::int64_t col = cm.col_sum(c);
        const std::int64_t tn = report.total - row - col + tp;
        s.support = row;
        s.recall = ratio(tp, row);
        s.precision = ratio(tp, col);
        s.f1 = f1_score(s.precision, s.recall);
        s.accuracy = ratio(tp + tn, report.total);
        report.per_class.push_back(s);
    }
    return report;
}

void write_metrics_report(std::ostream& os, const MetricsReport& report, const std::vector<std::string>& names) {
    os << "overall_accuracy: " << format(report.overall_accuracy, "null") << '\n';
    os << "total: " << report.total << '\n';
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& s = report.per_class[c];
        const std::string n = class_name(names, static_cast<int>(c));
        os << n << ".support: " << s.support << '\n';
        os << n << ".accuracy: " << format(s.accuracy, "null") << '\n';
        os << n << ".recall: " << format(s.recall, "null") << '\n';
        os << n << ".precision: " << format(s.precision, "null") << '\n';
        os << n << ".f1: " << format(s.f1, "null") << '\n';
    }
}

void write_confusion_csv(std::ostream& os, const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    os << "true\\pred";
    for (int p = 0; p < cm.classes(); ++p) os << ',' << class_name(names, p);
    os << '\n';
    for (int t = 0; t < cm.classes(); ++t) {
        os << class_name(names, t);
        for (int p = 0; p < cm.classes(); ++p) os << ',' << cm(t, p);
        os << '\n';
    }
}

void print_metrics_table(std::ostream& os, const MetricsReport& report, const std::vector<std::string>& names) {
    // The dash is three bytes of UTF-8 but one column wide.
    auto cell = [&os](MaybeRatio r, int width) {
        if (r) {
            os << std::setw(width) << format(r, "");
        } else {
            os << std::setw(width + 2) << "\u2014";
        }
    };
    os << "overall accuracy: " << format(report.overall_accuracy, "\u2014") << "  (n = " << report.total << ")\n";
    os << std::left << std::setw(12) << "class" << std::right << std::setw(9) << "support" << std::setw(11)
       << "accuracy" << std::setw(11) << "recall" << std::setw(11) << "precision" << std::setw(11) << "f1" << '\n';
    for (std::size_t c = 0; c < report.per_class.size(); ++c) {
        const auto& s = report.per_class[c];
        os << std::left << std::setw(12) << class_name(names, static_cast<int>(c)) << std::right << std::setw(9)
           << s.support;
        cell(s.accuracy, 11);
        cell(s.recall, 11);
        cell(s.precision, 11);
        cell(s.f1, 11);
        os << '\n';
    }
}

}  // namespace w2s
