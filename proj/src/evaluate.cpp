#include "seg4d/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "seg4d/errors.hpp"

namespace seg4d {

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::Pseudo: return "pseudo";
        case Provenance::GroundTruthBootstrap: return "ground-truth-bootstrap";
        case Provenance::Model: break;
    }
    return "model";
}

void ConfusionMatrix::add(int gt, int pred, std::uint64_t count) {
    if (gt < 0 || static_cast<std::size_t>(gt) >= n_ || pred < 0 || static_cast<std::size_t>(pred) >= n_) {
        throw InvalidInput("confusion matrix: class id out of range (gt " + std::to_string(gt) + ", pred " +
                           std::to_string(pred) + ")");
    }
    counts_[static_cast<std::size_t>(gt) * n_ + static_cast<std::size_t>(pred)] += count;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (auto c : counts_) t += c;
    return t;
}

std::uint64_t ConfusionMatrix::false_positives(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t g = 0; g < n_; ++g) {
        if (g != c) s += (*this)(g, c);
    }
    return s;
}

std::uint64_t ConfusionMatrix::false_negatives(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) {
        if (p != c) s += (*this)(c, p);
    }
    return s;
}

std::uint64_t ConfusionMatrix::gt_count(std::size_t c) const {
    std::uint64_t s = 0;
    for (std::size_t p = 0; p < n_; ++p) s += (*this)(c, p);
    return s;
}

void accumulate(ConfusionMatrix& cm, std::span<const int> predicted, std::span<const int> ground_truth,
                const ClassMap& classes) {
    if (predicted.size() != ground_truth.size()) {
        throw StructuralError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                              std::to_string(ground_truth.size()) + " labels");
    }
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (classes.ignored(ground_truth[i])) continue;
        cm.add(ground_truth[i], predicted[i]);
    }
}

EvalReport summarize(const ConfusionMatrix& cm, const ClassMap& classes, const EvalOptions& opts) {
    EvalReport rep;
    rep.confusion = cm;
    const std::size_t n = cm.classes();
    rep.iou.assign(n, std::numeric_limits<double>::quiet_NaN());
    rep.in_mean.assign(n, false);
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t c = 0; c < n; ++c) {
        if (classes.ignored(static_cast<int>(c))) continue;
        const auto tp = cm.true_positives(c);
        const auto denom = tp + cm.false_positives(c) + cm.false_negatives(c);
        if (denom > 0) rep.iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
        const bool include = opts.present_classes_only ? cm.gt_count(c) > 0 : true;
        if (include) {
            rep.in_mean[c] = true;
            sum += std::isnan(rep.iou[c]) ? 0.0 : rep.iou[c];
            ++used;
        }
    }
    rep.miou = used ? sum / static_cast<double>(used) : 0.0;
    return rep;
}

EvalReport evaluate_labels(std::span<const int> predicted, std::span<const int> ground_truth, const ClassMap& classes,
                           const EvalOptions& opts) {
    ConfusionMatrix cm(classes.size());
    accumulate(cm, predicted, ground_truth, classes);
    return summarize(cm, classes, opts);
}

EvalReport evaluate(const std::vector<PredictionSet>& predictions, const std::vector<Frame>& ground_truth,
                    const ClassMap& classes, const EvalOptions& opts) {
    if (predictions.size() != ground_truth.size()) {
        throw StructuralError("evaluate: " + std::to_string(predictions.size()) + " prediction sets for " +
                              std::to_string(ground_truth.size()) + " frames");
    }
    ConfusionMatrix cm(classes.size());
    for (std::size_t f = 0; f < predictions.size(); ++f) {
        if (!ground_truth[f].labels) throw StructuralError("evaluate: frame " + std::to_string(f) + " has no labels");
        accumulate(cm, predictions[f].classes, *ground_truth[f].labels, classes);
    }
    return summarize(cm, classes, opts);
}

std::string EvalReport::to_csv(const ClassMap& classes) const {
    std::ostringstream out;
    char buf[64];
    out << "class,iou\n";
    for (std::size_t c = 0; c < iou.size(); ++c) {
        if (classes.ignored(static_cast<int>(c))) continue;
        if (std::isnan(iou[c])) {
            out << classes.name(static_cast<int>(c)) << ",nan\n";
        } else {
            std::snprintf(buf, sizeof(buf), "%.6f", iou[c]);
            out << classes.name(static_cast<int>(c)) << ',' << buf << '\n';
        }
    }
    std::snprintf(buf, sizeof(buf), "%.6f", miou);
    out << "mIoU," << buf << '\n';
    return out.str();
}

}  // namespace seg4d
