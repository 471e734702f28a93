#pragma once

#include <optional>
#include <span>
#include <string>

#include "pcgcls/data_io.hpp"

namespace pcg {

struct Prediction {
    Label truth;
    Label predicted;
};

/// Binary metrics with ABNORMAL as the positive class. Percentages are kept
/// unrounded; sensitivity/specificity (and so MAcc) are empty when the class
/// they condition on is absent.
struct EvalReport {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
    std::optional<double> macc;

    long total() const { return tp + tn + fp + fn; }
};

EvalReport evaluate(std::span<const Prediction> predictions);
EvalReport evaluate_counts(long tp, long tn, long fp, long fn);

/// Half-away-from-zero rounding to 2 decimals, used only for reporting.
double round2(double percent);

/// Human-readable multi-line summary including the confusion matrix.
std::string format_report_text(const EvalReport& report, const std::string& classifier,
                               const std::string& features);

inline constexpr const char* kReportCsvHeader = "classifier,features,acc,sens,spec,macc";
/// `classifier,features,acc,sens,spec,macc` with 2-decimal values ("nan" when
/// undefined).
std::string format_report_csv_row(const EvalReport& report, const std::string& classifier,
                                  const std::string& features);

}  // namespace pcg
