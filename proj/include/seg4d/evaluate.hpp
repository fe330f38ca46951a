#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seg4d/class_map.hpp"
#include "seg4d/frame.hpp"
#include "seg4d/prediction.hpp"

namespace seg4d {

// Rows are ground truth, columns are predictions. Points whose ground truth is
// an ignored class are never added.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t classes = 0) : n_(classes), counts_(classes * classes, 0) {}

    std::size_t classes() const { return n_; }
    std::uint64_t operator()(std::size_t gt, std::size_t pred) const { return counts_[gt * n_ + pred]; }
    void add(int gt, int pred, std::uint64_t count = 1);
    std::uint64_t total() const;
    std::uint64_t true_positives(std::size_t c) const { return (*this)(c, c); }
    std::uint64_t false_positives(std::size_t c) const;
    std::uint64_t false_negatives(std::size_t c) const;
    std::uint64_t gt_count(std::size_t c) const;

private:
    std::size_t n_;
    std::vector<std::uint64_t> counts_;
};

struct EvalReport {
    std::vector<double> iou;       // NaN where TP+FP+FN == 0
    std::vector<bool> in_mean;     // classes averaged into miou
    double miou = 0.0;
    ConfusionMatrix confusion;

    // "class,iou" rows followed by "mIoU,<value>".
    std::string to_csv(const ClassMap& classes) const;
};

struct EvalOptions {
    // When true only classes present in the ground truth enter the mean;
    // otherwise every non-ignored class does.
    bool present_classes_only = true;
};

EvalReport evaluate_labels(std::span<const int> predicted, std::span<const int> ground_truth, const ClassMap& classes,
                           const EvalOptions& opts = {});

EvalReport evaluate(const std::vector<PredictionSet>& predictions, const std::vector<Frame>& ground_truth,
                    const ClassMap& classes, const EvalOptions& opts = {});

// Lower-level: accumulate into an existing matrix, then summarise.
void accumulate(ConfusionMatrix& cm, std::span<const int> predicted, std::span<const int> ground_truth,
                const ClassMap& classes);
EvalReport summarize(const ConfusionMatrix& cm, const ClassMap& classes, const EvalOptions& opts = {});

}  // namespace seg4d
