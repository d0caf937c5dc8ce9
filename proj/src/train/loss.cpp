#include "cht/train/loss.hpp"

#include <cmath>
#include <map>

#include "cht/error.hpp"

namespace cht::train {

double huber(double r, double delta) {
    const double a = std::abs(r);
    return a <= delta ? 0.5 * r * r : delta * (a - 0.5 * delta);
}

double huber_grad(double r, double delta) {
    if (r > delta) return delta;
    if (r < -delta) return -delta;
    return r;
}

size_t SparseLabelBatch::label_count() const {
    size_t n = 0;
    for (const auto& l : labels) n += l.size();
    return n;
}

template <typename T>
ShiftLoss<T> masked_shift_loss(const nn::BasicTensor<T>& pred, const SparseLabelBatch& batch,
                               int max_shift, double delta) {
    if (pred.rank() != 4 || pred.dim(1) != 1) {
        throw ShapeError("masked_shift_loss: prediction " + nn::shape_str(pred.shape()) +
                         " is not [B, 1, H, W]");
    }
    const int64_t B = pred.dim(0), H = pred.dim(2), W = pred.dim(3);
    if (static_cast<int64_t>(batch.labels.size()) != B) {
        throw ShapeError("masked_shift_loss: " + std::to_string(batch.labels.size()) +
                         " label sets for batch of " + std::to_string(B));
    }
    if (max_shift < 0) throw DomainError("masked_shift_loss: negative max_shift");

    ShiftLoss<T> out;
    const size_t total = batch.label_count();
    if (total == 0) {
        out.skip = true;
        out.loss = nn::BasicTensor<T>::scalar(T(0));
        return out;
    }

    const auto p = pred.data();
    // Flat prediction index and target for every label contributing to the chosen shifts.
    struct Term {
        int64_t index;
        double target;
        double weight;  // d loss / d huber term
    };
    std::vector<Term> terms;
    double loss = 0.0;

    for (int64_t b = 0; b < B; ++b) {
        std::map<int, std::vector<const geodata::Label*>> groups;
        for (const auto& l : batch.labels[b]) {
            if (l.row < 0 || l.col < 0 || l.row >= H || l.col >= W) {
                throw RangeError("masked_shift_loss: label (" + std::to_string(l.row) + ", " +
                                 std::to_string(l.col) + ") outside the prediction grid");
            }
            groups[l.track_id].push_back(&l);
        }
        for (const auto& [track, labels] : groups) {
            auto mean_at = [&](int di, int dj, size_t* used) {
                double acc = 0.0;
                size_t n = 0;
                for (const auto* l : labels) {
                    const int64_t r = l->row + di, c = l->col + dj;
                    if (r < 0 || c < 0 || r >= H || c >= W) continue;
                    acc += huber(static_cast<double>(p[(b * H + r) * W + c]) - l->height, delta);
                    ++n;
                }
                *used = n;
                return n ? acc / static_cast<double>(n) : INFINITY;
            };
            size_t best_n = 0;
            double best = mean_at(0, 0, &best_n);
            int best_di = 0, best_dj = 0;
            for (int di = -max_shift; di <= max_shift; ++di) {
                for (int dj = -max_shift; dj <= max_shift; ++dj) {
                    if (di == 0 && dj == 0) continue;
                    size_t n = 0;
                    const double m = mean_at(di, dj, &n);
                    if (m < best) {
                        best = m;
                        best_di = di;
                        best_dj = dj;
                        best_n = n;
                    }
                }
            }
            const double group_weight = static_cast<double>(labels.size()) / static_cast<double>(total);
            loss += group_weight * best;
            for (const auto* l : labels) {
                const int64_t r = l->row + best_di, c = l->col + best_dj;
                if (r < 0 || c < 0 || r >= H || c >= W) continue;
                terms.push_back({(b * H + r) * W + c, static_cast<double>(l->height),
                                 group_weight / static_cast<double>(best_n)});
            }
            out.choices.push_back(ShiftChoice{static_cast<int>(b), track, best_di, best_dj,
                                              static_cast<int>(labels.size()), best});
        }
    }

    out.loss = nn::make_result<T>(
        {}, {static_cast<T>(loss)}, {pred.node()},
        [terms = std::move(terms), delta](nn::TensorNode<T>& self) {
            auto& parent = *self.parents[0];
            if (!parent.requires_grad) return;
            auto& g = parent.ensure_grad();
            const double upstream = self.grad[0];
            for (const auto& t : terms) {
                g[t.index] += static_cast<T>(
                    upstream * t.weight * huber_grad(static_cast<double>(parent.value[t.index]) - t.target, delta));
            }
        });
    return out;
}

template ShiftLoss<float> masked_shift_loss(const nn::Tensor&, const SparseLabelBatch&, int, double);
template ShiftLoss<double> masked_shift_loss(const nn::TensorD&, const SparseLabelBatch&, int, double);

}  // namespace cht::train
