#pragma once

#include <vector>

#include "cht/geodata/archive.hpp"
#include "cht/nn/tensor.hpp"

namespace cht::train {

double huber(double residual, double delta);
// d huber / d residual
double huber_grad(double residual, double delta);

// Sparse labels for each sample of a batch; label rows/cols index the prediction grid.
struct SparseLabelBatch {
    std::vector<std::vector<geodata::Label>> labels;
    std::vector<int> years;

    size_t label_count() const;
};

// Shift picked for one track of one sample. A label at (r, c) is compared with the
// prediction at (r + di, c + dj).
struct ShiftChoice {
    int sample = 0;
    int track_id = 0;
    int di = 0;
    int dj = 0;
    int n_labels = 0;
    double mean_loss = 0.0;
};

template <typename T>
struct ShiftLoss {
    nn::BasicTensor<T> loss;  // scalar
    bool skip = false;        // no labels in the batch; loss is a constant zero
    std::vector<ShiftChoice> choices;
};

// Masked Huber loss with a per-track rigid shift. For each (sample, track) group every shift
// in [-max_shift, max_shift]^2 is tried; labels that leave the grid are dropped for that
// candidate and the mean renormalised. The smallest mean wins, ties going to (0, 0) and then
// to the lexicographically smallest (di, dj). Groups are combined with weights equal to their
// label counts. pred: [B, 1, H, W].
template <typename T>
ShiftLoss<T> masked_shift_loss(const nn::BasicTensor<T>& pred, const SparseLabelBatch& batch,
                               int max_shift, double delta);

// Plain masked Huber: the same loss with only the zero shift.
template <typename T>
ShiftLoss<T> masked_huber(const nn::BasicTensor<T>& pred, const SparseLabelBatch& batch, double delta) {
    return masked_shift_loss(pred, batch, 0, delta);
}

}  // namespace cht::train
