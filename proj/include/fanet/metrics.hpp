#pragma once

#include <cstdint>
#include <string>

#include "fanet/tensor.hpp"

namespace fanet {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }

    ConfusionCounts& merge(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
};

struct MetricsReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double iou = 0.0;
    bool degenerate = false;  // some ratio was 0/0 and pinned to 0
    ConfusionCounts counts;
};

// pixel -> 1 iff probability >= threshold; threshold must lie in (0,1)
Tensor binarize(const Tensor& probabilities, double threshold);

// per-pixel confusion update; pred and truth must be equal-shape binary maps
void accumulate(const Tensor& pred, const Tensor& truth, ConfusionCounts& counts);

MetricsReport report(const ConfusionCounts& counts);

// percentages with two decimals, the interchange format for reported numbers
std::string format_percent(double fraction);
double parse_percent(const std::string& text);

std::string report_to_kv(const MetricsReport& r);
std::string report_to_json(const MetricsReport& r);

}  // namespace fanet
