#pragma once

#include "dbfgm/core_types.hpp"

#include <cmath>

namespace dbfgm {

struct ConfusionCounts {
    long tp = 0;
    long fp = 0;
    long tn = 0;
    long fn = 0;

    long total() const noexcept { return tp + fp + tn + fn; }
    bool operator==(const ConfusionCounts&) const = default;
};

/// Counts over unordered pairs j1 < j2.
inline ConfusionCounts confusion(const Graph& est, const Graph& truth) {
    if (est.rows() != est.cols() || truth.rows() != truth.cols() || est.rows() != truth.rows()) {
        throw ValidationError("ShapeMismatch", "estimate and truth must be square with the same size");
    }
    ConfusionCounts c;
    for (Index a = 0; a < est.rows(); ++a) {
        for (Index b = a + 1; b < est.cols(); ++b) {
            const bool e = est(a, b) != 0;
            const bool t = truth(a, b) != 0;
            if (e && t) ++c.tp;
            else if (e) ++c.fp;
            else if (t) ++c.fn;
            else ++c.tn;
        }
    }
    return c;
}

struct Rates {
    double tpr = 0.0;
    double fpr = 0.0;
    double mcc = 0.0;
    // Set when the statistic's denominator was zero and 0 was reported instead.
    bool tpr_undefined = false;
    bool fpr_undefined = false;
    bool mcc_undefined = false;
};

inline Rates rates(const ConfusionCounts& c) {
    Rates r;
    const auto tp = static_cast<double>(c.tp);
    const auto fp = static_cast<double>(c.fp);
    const auto tn = static_cast<double>(c.tn);
    const auto fn = static_cast<double>(c.fn);
    if (tp + fn > 0) r.tpr = tp / (tp + fn);
    else r.tpr_undefined = true;
    if (fp + tn > 0) r.fpr = fp / (fp + tn);
    else r.fpr_undefined = true;
    const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
    if (denom > 0) r.mcc = (tp * tn - fp * fn) / std::sqrt(denom);
    else r.mcc_undefined = true;
    return r;
}

}  // namespace dbfgm
