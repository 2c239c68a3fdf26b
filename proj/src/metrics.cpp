#include "fanet/metrics.hpp"

#include <cstdio>
#include <cstdlib>

#include <json.hpp>

namespace fanet {

Tensor binarize(const Tensor& probabilities, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ConfigError("threshold must lie strictly in (0,1), got " + std::to_string(threshold));
    }
    Tensor out(probabilities.shape());
    auto src = probabilities.data();
    auto dst = out.data();
    const float t = static_cast<float>(threshold);
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= t ? 1.0f : 0.0f;
    return out;
}

void accumulate(const Tensor& pred, const Tensor& truth, ConfusionCounts& counts) {
    if (!(pred.shape() == truth.shape())) {
        throw ValidationError("confusion accumulate needs equal shapes, got " + pred.shape().str() +
                              " vs " + truth.shape().str());
    }
    auto p = pred.data();
    auto t = truth.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] != 0.0f && p[i] != 1.0f) {
            throw ValidationError("prediction mask is not binary at element " + std::to_string(i));
        }
        if (t[i] != 0.0f && t[i] != 1.0f) {
            throw ValidationError("truth mask is not binary at element " + std::to_string(i));
        }
        const bool pp = p[i] == 1.0f;
        const bool tt = t[i] == 1.0f;
        if (pp && tt) ++counts.tp;
        else if (pp) ++counts.fp;
        else if (tt) ++counts.fn;
        else ++counts.tn;
    }
}

MetricsReport report(const ConfusionCounts& c) {
    MetricsReport r;
    r.counts = c;
    // Every numerator here is tp, so a zero denominator implies 0/0; the
    // report pins those to 0 and raises the flag instead of throwing.
    auto ratio = [&r](std::uint64_t num, std::uint64_t den) {
        if (den == 0) {
            r.degenerate = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.precision = ratio(c.tp, c.tp + c.fp);
    r.recall = ratio(c.tp, c.tp + c.fn);
    if (r.precision + r.recall > 0.0) {
        r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
    } else {
        r.f1 = 0.0;
        r.degenerate = true;
    }
    r.iou = ratio(c.tp, c.tp + c.fp + c.fn);
    return r;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", fraction * 100.0);
    return buf;
}

double parse_percent(const std::string& text) {
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') {
        throw ValidationError("not a percentage: \"" + text + "\"");
    }
    return v / 100.0;
}

std::string report_to_kv(const MetricsReport& r) {
    std::string out;
    auto line = [&out](const std::string& k, const std::string& v) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    };
    line("counts.tp", std::to_string(r.counts.tp));
    line("counts.fp", std::to_string(r.counts.fp));
    line("counts.fn", std::to_string(r.counts.fn));
    line("counts.tn", std::to_string(r.counts.tn));
    line("precision_pct", format_percent(r.precision));
    line("recall_pct", format_percent(r.recall));
    line("f1_pct", format_percent(r.f1));
    line("iou_pct", format_percent(r.iou));
    line("degenerate", r.degenerate ? "true" : "false");
    return out;
}

std::string report_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn}};
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["iou"] = r.iou;
    j["precision_pct"] = format_percent(r.precision);
    j["recall_pct"] = format_percent(r.recall);
    j["f1_pct"] = format_percent(r.f1);
    j["iou_pct"] = format_percent(r.iou);
    j["degenerate"] = r.degenerate;
    return j.dump(2);
}

}  // namespace fanet
