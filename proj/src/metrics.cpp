#include "pcgcls/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "pcgcls/error.hpp"

namespace pcg {

EvalReport evaluate_counts(long tp, long tn, long fp, long fn) {
    if (tp < 0 || tn < 0 || fp < 0 || fn < 0) throw ValidationError("confusion counts must be non-negative");
    EvalReport r;
    r.tp = tp;
    r.tn = tn;
    r.fp = fp;
    r.fn = fn;
    const long total = r.total();
    if (total == 0) throw ValidationError("cannot evaluate an empty prediction list");
    r.accuracy = 100.0 * static_cast<double>(tp + tn) / static_cast<double>(total);
    if (tp + fn > 0) r.sensitivity = 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tn + fp > 0) r.specificity = 100.0 * static_cast<double>(tn) / static_cast<double>(tn + fp);
    if (r.sensitivity && r.specificity) r.macc = (*r.sensitivity + *r.specificity) / 2.0;
    return r;
}

EvalReport evaluate(std::span<const Prediction> predictions) {
    long tp = 0, tn = 0, fp = 0, fn = 0;
    for (const auto& p : predictions) {
        const bool positive = p.truth == Label::Abnormal;
        const bool hit = p.truth == p.predicted;
        if (positive) (hit ? tp : fn)++;
        else (hit ? tn : fp)++;
    }
    return evaluate_counts(tp, tn, fp, fn);
}

double round2(double percent) { return std::round(percent * 100.0) / 100.0; }

namespace {

std::string fmt2(const std::optional<double>& v) {
    if (!v) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", round2(*v));
    return buf;
}

}  // namespace

std::string format_report_text(const EvalReport& r, const std::string& classifier, const std::string& features) {
    std::string out;
    out += "classifier:  " + classifier + "\n";
    out += "features:    " + features + "\n";
    out += "beats:       " + std::to_string(r.total()) + "\n";
    out += "accuracy:    " + fmt2(r.accuracy) + " %\n";
    out += "sensitivity: " + fmt2(r.sensitivity) + " %" + (r.sensitivity ? "" : "  (undefined: no abnormal beats)") + "\n";
    out += "specificity: " + fmt2(r.specificity) + " %" + (r.specificity ? "" : "  (undefined: no normal beats)") + "\n";
    out += "macc:        " + fmt2(r.macc) + " %\n";
    out += "confusion (positive = abnormal)\n";
    out += "                 pred abnormal  pred normal\n";
    char line[128];
    std::snprintf(line, sizeof line, "  true abnormal  %13ld  %11ld\n", r.tp, r.fn);
    out += line;
    std::snprintf(line, sizeof line, "  true normal    %13ld  %11ld\n", r.fp, r.tn);
    out += line;
    out += "TP=" + std::to_string(r.tp) + " TN=" + std::to_string(r.tn) + " FP=" + std::to_string(r.fp) +
           " FN=" + std::to_string(r.fn) + "\n";
    return out;
}

std::string format_report_csv_row(const EvalReport& r, const std::string& classifier, const std::string& features) {
    return classifier + "," + features + "," + fmt2(r.accuracy) + "," + fmt2(r.sensitivity) + "," +
           fmt2(r.specificity) + "," + fmt2(r.macc);
}

}  // namespace pcg
