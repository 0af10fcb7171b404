#pragma once

// Loss, relative-L2 metrics and the Adam training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "msdon/csv.hpp"
#include "msdon/dataset.hpp"
#include "msdon/deeponet.hpp"
#include "msdon/error.hpp"
#include "msdon/neural.hpp"

namespace msdon {

// L = (1/N) sum_i (1/max_j |y_ij|) dt sum_j (f_ij - y_ij)^2 over the N rows.
inline double weighted_loss(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, double dt)
{
    detail::require(pred.rows() == target.rows() && pred.cols() == target.cols(), "weighted_loss: shape mismatch");
    detail::require(target.rows() > 0, "weighted_loss: no rows");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
        const double mx = target.row(i).cwiseAbs().maxCoeff();
        if (!(mx > 0.0)) throw InvalidArgument("weighted_loss: row " + std::to_string(i) + " has zero amplitude");
        sum += dt * (pred.row(i) - target.row(i)).squaredNorm() / mx;
    }
    return sum / static_cast<double>(target.rows());
}

// Mean over rows of ||f_i - y_i|| / ||y_i|| (dt cancels).
inline double relative_l2(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, double dt = 1.0)
{
    detail::require(pred.rows() == target.rows() && pred.cols() == target.cols(), "relative_l2: shape mismatch");
    detail::require(target.rows() > 0, "relative_l2: no rows");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < target.rows(); ++i) {
        const double den = dt * target.row(i).squaredNorm();
        if (!(den > 0.0)) throw InvalidArgument("relative_l2: row " + std::to_string(i) + " has zero norm");
        sum += std::sqrt(dt * (pred.row(i) - target.row(i)).squaredNorm() / den);
    }
    return sum / static_cast<double>(target.rows());
}

// ---------------------------------------------------------------------------
// Batches. All samples in a batch share query times.

struct Batch {
    Eigen::MatrixXd inputs; // m x N
    Eigen::VectorXd times;  // T
    FloorMatrices targets;  // per floor N x T
    Eigen::MatrixXd max_abs; // N x l
};

inline Batch make_batch(std::span<const OperatorSample> samples, std::span<const std::size_t> idx)
{
    detail::require(!idx.empty(), "make_batch: empty batch");
    const OperatorSample& first = samples[idx.front()];
    const auto m = static_cast<Eigen::Index>(first.branch_input.size());
    const auto n = static_cast<Eigen::Index>(idx.size());
    const auto t = static_cast<Eigen::Index>(first.query_times.size());
    const std::size_t l = first.max_abs_target.size();
    Batch b;
    b.inputs.resize(m, n);
    b.times = Eigen::Map<const Eigen::VectorXd>(first.query_times.data(), t);
    b.targets.assign(l, Eigen::MatrixXd(n, t));
    b.max_abs.resize(n, static_cast<Eigen::Index>(l));
    for (Eigen::Index i = 0; i < n; ++i) {
        const OperatorSample& s = samples[idx[static_cast<std::size_t>(i)]];
        if (static_cast<Eigen::Index>(s.branch_input.size()) != m || s.query_times != first.query_times ||
            s.max_abs_target.size() != l)
            throw InvalidArgument("make_batch: samples " + first.id + " and " + s.id + " are incompatible");
        b.inputs.col(i) = Eigen::Map<const Eigen::VectorXd>(s.branch_input.data(), m);
        for (std::size_t f = 0; f < l; ++f) {
            b.targets[f].row(i) = s.targets.col(static_cast<Eigen::Index>(f)).transpose();
            b.max_abs(i, static_cast<Eigen::Index>(f)) = s.max_abs_target[f];
        }
    }
    return b;
}

inline Batch make_batch(std::span<const OperatorSample> samples)
{
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return make_batch(samples, idx);
}

inline double query_dt(const Eigen::VectorXd& times) { return times.size() > 1 ? times(1) - times(0) : 1.0; }

// Rows are (sample, floor) pairs.
inline double batch_loss(const FloorMatrices& pred, const Batch& b, FloorMatrices* d_pred = nullptr)
{
    const double dt = query_dt(b.times);
    const double rows = static_cast<double>(b.inputs.cols()) * static_cast<double>(pred.size());
    double loss = 0.0;
    if (d_pred) d_pred->resize(pred.size());
    for (std::size_t f = 0; f < pred.size(); ++f) {
        const Eigen::MatrixXd diff = pred[f] - b.targets[f];
        const Eigen::VectorXd inv = b.max_abs.col(static_cast<Eigen::Index>(f)).cwiseInverse();
        loss += dt * (diff.rowwise().squaredNorm().cwiseProduct(inv)).sum() / rows;
        if (d_pred) (*d_pred)[f] = (2.0 * dt / rows) * (inv.asDiagonal() * diff);
    }
    return loss;
}

// Per-sample ||f - y|| / ||y|| over all floors and query times, averaged.
inline double batch_relative_l2(const FloorMatrices& pred, const Batch& b)
{
    const Eigen::Index n = b.inputs.cols();
    Eigen::VectorXd num = Eigen::VectorXd::Zero(n), den = Eigen::VectorXd::Zero(n);
    for (std::size_t f = 0; f < pred.size(); ++f) {
        num += (pred[f] - b.targets[f]).rowwise().squaredNorm();
        den += b.targets[f].rowwise().squaredNorm();
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(den(i) > 0.0)) throw InvalidArgument("relative_l2: zero-norm target");
        sum += std::sqrt(num(i) / den(i));
    }
    return sum / static_cast<double>(n);
}

// Mean squared error after scaling each (sample, floor) row by 1/max|y|.
inline double batch_normalized_mse(const FloorMatrices& pred, const Batch& b)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        const Eigen::VectorXd inv = b.max_abs.col(static_cast<Eigen::Index>(f)).cwiseInverse();
        sum += (inv.asDiagonal() * (pred[f] - b.targets[f])).squaredNorm();
        count += static_cast<std::size_t>(pred[f].size());
    }
    return sum / static_cast<double>(count);
}

template <class Model>
struct TapeFor;
template <>
struct TapeFor<DeepONetModel> {
    using type = DeepONetTape;
};
template <>
struct TapeFor<AmplitudeSeparatedModel> {
    using type = AmplitudeSeparatedTape;
};

template <class Model>
double evaluate(const Model& model, std::span<const OperatorSample> test)
{
    if (test.empty()) throw InvalidArgument("evaluate: empty test set");
    const Batch b = make_batch(test);
    return batch_relative_l2(predict(model, b.inputs, b.times), b);
}

// Normalization constants from training data: sensor amplitude, record
// duration and per-floor response amplitude.
inline Normalization fit_normalization(std::span<const OperatorSample> train)
{
    detail::require(!train.empty(), "fit_normalization: empty training set");
    Normalization n;
    double umax = 0.0, tmax = 0.0;
    n.output_scale.assign(train.front().max_abs_target.size(), 0.0);
    for (const auto& s : train) {
        for (double v : s.branch_input) umax = std::max(umax, std::abs(v));
        if (!s.query_times.empty()) tmax = std::max(tmax, s.query_times.back());
        for (std::size_t f = 0; f < n.output_scale.size(); ++f)
            n.output_scale[f] = std::max(n.output_scale[f], s.max_abs_target[f]);
    }
    n.input_scale = umax > 0.0 ? 1.0 / umax : 1.0;
    n.time_scale = tmax > 0.0 ? 1.0 / tmax : 1.0;
    return n;
}

// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 1500;
    std::size_t batches_per_epoch = 40;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    // Synthesize each batch from random weighted subsets of the base
    // training samples instead of drawing stored samples.
    bool on_the_fly_augmentation = false;
    std::size_t subset_size = 4;
    bool signed_weights = false;

    void validate() const
    {
        if (batches_per_epoch == 0 || batch_size == 0) throw InvalidArgument("TrainConfig: batch counts must be positive");
        if (!(learning_rate > 0.0)) throw InvalidArgument("TrainConfig: learning rate must be positive");
        if (on_the_fly_augmentation && subset_size == 0) throw InvalidArgument("TrainConfig: subset_size must be >= 1");
    }
};

struct MetricHistory {
    std::vector<double> train_rel_l2; // per epoch, averaged over that epoch's batches
    std::vector<double> test_rel_l2;  // per epoch, at epoch end; NaN without a test set
    std::vector<double> train_mse;    // per epoch, normalized MSE on base training samples at epoch end
    std::vector<double> batch_loss;   // per batch

    std::size_t epochs() const { return train_rel_l2.size(); }
};

// First epoch (1-based) whose train_mse is at or below threshold, 0 if none.
inline std::size_t epochs_to_threshold(const MetricHistory& h, double threshold)
{
    for (std::size_t e = 0; e < h.train_mse.size(); ++e)
        if (h.train_mse[e] <= threshold) return e + 1;
    return 0;
}

inline void write_history_csv(const MetricHistory& h, const std::filesystem::path& path)
{
    csv::Writer w(path, {"epoch", "train_rel_l2", "test_rel_l2", "train_mse"});
    for (std::size_t e = 0; e < h.epochs(); ++e)
        w.row({static_cast<double>(e + 1), h.train_rel_l2[e], h.test_rel_l2[e], h.train_mse[e]});
}

template <class Model>
struct TrainResult {
    Model model;
    MetricHistory history;
};

// Called after every epoch with (epoch, history); may be empty.
using EpochCallback = std::function<void(std::size_t, const MetricHistory&)>;

template <class Model>
TrainResult<Model> train(std::span<const OperatorSample> train_set, std::span<const OperatorSample> test_set,
                         Model model, const TrainConfig& cfg, const EpochCallback& on_epoch = {})
{
    if (train_set.empty()) throw InvalidArgument("train: empty training set");
    cfg.validate();
    TrainResult<Model> out{std::move(model), {}};
    if (cfg.epochs == 0) return out;

    std::vector<OperatorSample> base;
    for (const auto& s : train_set)
        if (!s.augmented) base.push_back(s);
    if (base.empty()) base.assign(train_set.begin(), train_set.end());
    const Batch base_batch = make_batch(base);
    const bool has_test = !test_set.empty();
    const Batch test_batch = has_test ? make_batch(test_set) : Batch{};
    if (cfg.on_the_fly_augmentation && cfg.subset_size > base.size())
        throw InvalidArgument("train: subset_size exceeds the number of base training samples");

    std::mt19937_64 rng(cfg.seed);
    AdamState adam;
    adam.learning_rate = cfg.learning_rate;
    typename TapeFor<Model>::type tape;
    Model grad = zeros_like(out.model);

    std::vector<std::size_t> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();

    std::vector<OperatorSample> mixed;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double rel_sum = 0.0;
        if (!cfg.on_the_fly_augmentation) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        for (std::size_t k = 0; k < cfg.batches_per_epoch; ++k) {
            Batch b;
            if (cfg.on_the_fly_augmentation) {
                mixed.clear();
                for (std::size_t i = 0; i < cfg.batch_size; ++i) {
                    const auto idx = draw_subset(base.size(), cfg.subset_size, rng);
                    const auto w = draw_weights(cfg.subset_size, cfg.signed_weights, rng);
                    mixed.push_back(combine_samples(base, idx, w));
                }
                b = make_batch(mixed);
            } else {
                const std::size_t size = std::min(cfg.batch_size, order.size());
                std::vector<std::size_t> idx;
                idx.reserve(size);
                for (std::size_t i = 0; i < size; ++i) {
                    if (cursor == order.size()) {
                        std::shuffle(order.begin(), order.end(), rng);
                        cursor = 0;
                    }
                    idx.push_back(order[cursor++]);
                }
                b = make_batch(train_set, idx);
            }

            const FloorMatrices pred = predict(out.model, b.inputs, b.times, &tape);
            FloorMatrices d_pred;
            const double loss = batch_loss(pred, b, &d_pred);
            if (!std::isfinite(loss))
                throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                                   std::to_string(k + 1));
            out.history.batch_loss.push_back(loss);
            rel_sum += batch_relative_l2(pred, b);

            visit_params(grad, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
            backward(out.model, tape, d_pred, grad);
            adam_step(out.model, grad, adam);
        }
        out.history.train_rel_l2.push_back(rel_sum / static_cast<double>(cfg.batches_per_epoch));
        const FloorMatrices base_pred = predict(out.model, base_batch.inputs, base_batch.times);
        out.history.train_mse.push_back(batch_normalized_mse(base_pred, base_batch));
        out.history.test_rel_l2.push_back(
            has_test ? batch_relative_l2(predict(out.model, test_batch.inputs, test_batch.times), test_batch) : NAN);
        if (on_epoch) on_epoch(epoch + 1, out.history);
    }
    return out;
}

} // namespace msdon
