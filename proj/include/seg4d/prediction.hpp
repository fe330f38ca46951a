#pragma once

#include <string>
#include <vector>

#include "seg4d/errors.hpp"
#include "seg4d/losses.hpp"
#include "seg4d/tensor.hpp"

namespace seg4d {

enum class Provenance { Model, Pseudo, GroundTruthBootstrap };

const char* provenance_name(Provenance p);

// Per-point logits, softmax probabilities and argmax ids for one frame.
struct PredictionSet {
    Matrix<float> logits;
    Matrix<float> probs;
    std::vector<int> classes;
    int frame_index = 0;
    Provenance provenance = Provenance::Model;

    std::size_t size() const { return classes.size(); }

    static PredictionSet from_logits(Matrix<float> logits, int frame_index, Provenance prov = Provenance::Model) {
        PredictionSet p;
        p.probs = softmax(logits);
        p.classes = argmax_rows(p.probs);
        p.logits = std::move(logits);
        p.frame_index = frame_index;
        p.provenance = prov;
        return p;
    }

    // One-hot probabilities from class ids; logits are left empty.
    static PredictionSet one_hot(const std::vector<int>& labels, std::size_t num_classes, int frame_index) {
        PredictionSet p;
        p.probs.resize(labels.size(), num_classes);
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
                throw InvalidInput("one_hot: label " + std::to_string(labels[i]) + " out of range");
            }
            p.probs(i, static_cast<std::size_t>(labels[i])) = 1.0f;
        }
        p.classes = labels;
        p.frame_index = frame_index;
        p.provenance = Provenance::GroundTruthBootstrap;
        return p;
    }
};

}  // namespace seg4d
