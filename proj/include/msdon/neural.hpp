#pragma once

// Dense and multiscale networks with hand-written reverse-mode gradients.
//
// Batches are column-major: an input batch is (in_dim x batch), each column
// one example. Hidden layers are affine + activation; the output layer is
// affine only. A multiscale net evaluates subnet i on scales[i] * x and
// stacks the subnet outputs.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "msdon/error.hpp"

namespace msdon {

enum class Activation { sin, relu, identity };

inline std::string to_string(Activation a)
{
    switch (a) {
    case Activation::sin: return "sin";
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s)
{
    if (s == "sin") return Activation::sin;
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw InvalidArgument("unknown activation '" + s + "'");
}

struct DenseLayer {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
};

struct DenseNet {
    Activation activation = Activation::sin;
    std::vector<DenseLayer> layers;

    // layer_sizes = {in, hidden..., out}
    static DenseNet zeros(const std::vector<std::size_t>& layer_sizes, Activation act)
    {
        detail::require(layer_sizes.size() >= 2, "DenseNet: need at least input and output sizes");
        DenseNet net;
        net.activation = act;
        for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
            detail::require(layer_sizes[l] > 0 && layer_sizes[l + 1] > 0, "DenseNet: layer sizes must be positive");
            const auto out = static_cast<Eigen::Index>(layer_sizes[l + 1]);
            const auto in = static_cast<Eigen::Index>(layer_sizes[l]);
            net.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
        }
        return net;
    }

    std::size_t in_dim() const { return static_cast<std::size_t>(layers.front().weight.cols()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(layers.back().weight.rows()); }

    std::vector<std::size_t> layer_sizes() const
    {
        std::vector<std::size_t> s{in_dim()};
        for (const auto& l : layers) s.push_back(static_cast<std::size_t>(l.weight.rows()));
        return s;
    }
};

struct MultiscaleNet {
    std::vector<double> scales;
    std::vector<DenseNet> subnets;

    std::size_t in_dim() const { return subnets.front().in_dim(); }
    std::size_t out_dim() const
    {
        std::size_t n = 0;
        for (const auto& s : subnets) n += s.out_dim();
        return n;
    }
};

using Net = std::variant<DenseNet, MultiscaleNet>;

inline bool is_multiscale(const Net& n) { return std::holds_alternative<MultiscaleNet>(n); }
inline std::size_t in_dim(const Net& n) { return std::visit([](const auto& x) { return x.in_dim(); }, n); }
inline std::size_t out_dim(const Net& n) { return std::visit([](const auto& x) { return x.out_dim(); }, n); }

// ---------------------------------------------------------------------------
// Parameter traversal. f receives std::span<double> (or span<const double>
// for const nets) for every weight matrix and bias vector, in a fixed order.

template <class D, class F>
    requires std::is_same_v<std::remove_const_t<D>, DenseNet>
void visit_params(D& net, F&& f)
{
    for (auto& l : net.layers) {
        f(std::span(l.weight.data(), static_cast<std::size_t>(l.weight.size())));
        f(std::span(l.bias.data(), static_cast<std::size_t>(l.bias.size())));
    }
}

template <class M, class F>
    requires std::is_same_v<std::remove_const_t<M>, MultiscaleNet>
void visit_params(M& net, F&& f)
{
    for (auto& s : net.subnets) visit_params(s, f);
}

template <class N, class F>
    requires std::is_same_v<std::remove_const_t<N>, Net>
void visit_params(N& net, F&& f)
{
    std::visit([&](auto& x) { visit_params(x, f); }, net);
}

template <class T>
std::size_t count_parameters(const T& net)
{
    std::size_t n = 0;
    visit_params(net, [&](auto s) { n += s.size(); });
    return n;
}

template <class T>
T zeros_like(const T& net)
{
    T z = net;
    visit_params(z, [](std::span<double> s) { std::fill(s.begin(), s.end(), 0.0); });
    return z;
}

// ---------------------------------------------------------------------------
// Forward / backward

namespace detail {

inline Eigen::MatrixXd activate(Activation a, const Eigen::MatrixXd& z)
{
    switch (a) {
    case Activation::sin: return z.array().sin().matrix();
    case Activation::relu: return z.cwiseMax(0.0);
    case Activation::identity: return z;
    }
    return z;
}

// relu'(0) = 0.
inline Eigen::MatrixXd activation_derivative(Activation a, const Eigen::MatrixXd& z)
{
    switch (a) {
    case Activation::sin: return z.array().cos().matrix();
    case Activation::relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::identity: return Eigen::MatrixXd::Ones(z.rows(), z.cols());
    }
    return z;
}

} // namespace detail

struct DenseTape {
    std::vector<Eigen::MatrixXd> inputs; // input to each layer
    std::vector<Eigen::MatrixXd> pre;    // pre-activation of each layer
};

struct NetTape {
    DenseTape dense;
    std::vector<DenseTape> subnets;
};

inline Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& x, DenseTape* tape = nullptr)
{
    if (static_cast<std::size_t>(x.rows()) != net.in_dim())
        throw InvalidArgument("DenseNet forward: input arity " + std::to_string(x.rows()) + " != " +
                              std::to_string(net.in_dim()));
    if (tape) {
        tape->inputs.clear();
        tape->pre.clear();
    }
    Eigen::MatrixXd h = x;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const auto& layer = net.layers[l];
        Eigen::MatrixXd z = layer.weight * h;
        z.colwise() += layer.bias;
        const bool last = l + 1 == net.layers.size();
        if (tape) {
            tape->inputs.push_back(std::move(h));
            if (!last) tape->pre.push_back(z);
        }
        h = last ? std::move(z) : detail::activate(net.activation, z);
    }
    return h;
}

// Accumulates parameter gradients into grad (same shape as net). When dx is
// non-null it receives the gradient with respect to the input batch.
inline void backward(const DenseNet& net, const DenseTape& tape, const Eigen::MatrixXd& dy, DenseNet& grad,
                     Eigen::MatrixXd* dx = nullptr)
{
    Eigen::MatrixXd g = dy;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        if (l + 1 < net.layers.size())
            g = g.cwiseProduct(detail::activation_derivative(net.activation, tape.pre[l]));
        grad.layers[l].weight.noalias() += g * tape.inputs[l].transpose();
        grad.layers[l].bias += g.rowwise().sum();
        if (l > 0 || dx) g = net.layers[l].weight.transpose() * g;
    }
    if (dx) *dx = std::move(g);
}

inline Eigen::MatrixXd forward(const MultiscaleNet& net, const Eigen::MatrixXd& x, std::vector<DenseTape>* tapes = nullptr)
{
    if (net.subnets.empty()) throw InvalidArgument("MultiscaleNet: no subnets");
    if (static_cast<std::size_t>(x.rows()) != net.in_dim())
        throw InvalidArgument("MultiscaleNet forward: input arity " + std::to_string(x.rows()) + " != " +
                              std::to_string(net.in_dim()));
    if (tapes) tapes->assign(net.subnets.size(), DenseTape{});
    Eigen::MatrixXd out(static_cast<Eigen::Index>(net.out_dim()), x.cols());
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < net.subnets.size(); ++i) {
        const Eigen::MatrixXd y = forward(net.subnets[i], net.scales[i] * x, tapes ? &(*tapes)[i] : nullptr);
        out.middleRows(row, y.rows()) = y;
        row += y.rows();
    }
    return out;
}

inline void backward(const MultiscaleNet& net, const std::vector<DenseTape>& tapes, const Eigen::MatrixXd& dy,
                     MultiscaleNet& grad, Eigen::MatrixXd* dx = nullptr)
{
    if (dx) *dx = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(net.in_dim()), dy.cols());
    Eigen::Index row = 0;
    for (std::size_t i = 0; i < net.subnets.size(); ++i) {
        const auto rows = static_cast<Eigen::Index>(net.subnets[i].out_dim());
        Eigen::MatrixXd dxi;
        backward(net.subnets[i], tapes[i], dy.middleRows(row, rows), grad.subnets[i], dx ? &dxi : nullptr);
        if (dx) *dx += net.scales[i] * dxi;
        row += rows;
    }
}

inline Eigen::MatrixXd forward(const Net& net, const Eigen::MatrixXd& x, NetTape* tape = nullptr)
{
    if (const auto* d = std::get_if<DenseNet>(&net)) return forward(*d, x, tape ? &tape->dense : nullptr);
    return forward(std::get<MultiscaleNet>(net), x, tape ? &tape->subnets : nullptr);
}

inline void backward(const Net& net, const NetTape& tape, const Eigen::MatrixXd& dy, Net& grad,
                     Eigen::MatrixXd* dx = nullptr)
{
    if (const auto* d = std::get_if<DenseNet>(&net)) {
        backward(*d, tape.dense, dy, std::get<DenseNet>(grad), dx);
        return;
    }
    backward(std::get<MultiscaleNet>(net), tape.subnets, dy, std::get<MultiscaleNet>(grad), dx);
}

// Single-example conveniences.
inline std::vector<double> dense_forward(const DenseNet& net, std::span<const double> x)
{
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd y = forward(net, in);
    return std::vector<double>(y.data(), y.data() + y.size());
}

inline std::vector<double> multiscale_forward(const MultiscaleNet& net, std::span<const double> x)
{
    const Eigen::MatrixXd in = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::MatrixXd y = forward(net, in);
    return std::vector<double>(y.data(), y.data() + y.size());
}

// ---------------------------------------------------------------------------
// Construction

struct NetSpec {
    bool multiscale = false;
    std::size_t in_dim = 1;
    std::size_t out_dim = 1;       // total output arity (all subnets together)
    std::size_t hidden_layers = 3; // hidden layers per (sub)net; affine layers = hidden_layers + 1
    std::size_t width = 8;         // neurons per hidden layer
    Activation activation = Activation::sin;
    std::vector<double> scales; // multiscale only
};

// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
inline void glorot_init(DenseNet& net, std::mt19937_64& rng)
{
    for (auto& l : net.layers) {
        const double bound = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
        std::uniform_real_distribution<double> u(-bound, bound);
        // Row-major fill so the draw order matches the checkpoint layout.
        for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = u(rng);
        l.bias.setZero();
    }
}

inline std::vector<std::size_t> dense_layer_sizes(std::size_t in, std::size_t width, std::size_t hidden_layers,
                                                  std::size_t out)
{
    std::vector<std::size_t> s{in};
    for (std::size_t i = 0; i < hidden_layers; ++i) s.push_back(width);
    s.push_back(out);
    return s;
}

inline Net init_params(const NetSpec& spec, std::mt19937_64& rng)
{
    detail::require(spec.in_dim > 0 && spec.out_dim > 0 && spec.width > 0, "NetSpec: sizes must be positive");
    if (!spec.multiscale) {
        DenseNet d = DenseNet::zeros(dense_layer_sizes(spec.in_dim, spec.width, spec.hidden_layers, spec.out_dim),
                                     spec.activation);
        glorot_init(d, rng);
        return d;
    }
    const std::size_t s = spec.scales.size();
    detail::require(s >= 1, "NetSpec: multiscale net needs at least one scale");
    detail::require(spec.out_dim % s == 0, "NetSpec: multiscale output arity must be divisible by the subnet count");
    MultiscaleNet ms;
    ms.scales = spec.scales;
    for (double sc : ms.scales) detail::require(sc > 0.0 && std::isfinite(sc), "NetSpec: scales must be positive");
    for (std::size_t i = 0; i < s; ++i) {
        DenseNet d = DenseNet::zeros(dense_layer_sizes(spec.in_dim, spec.width, spec.hidden_layers, spec.out_dim / s),
                                     spec.activation);
        glorot_init(d, rng);
        ms.subnets.push_back(std::move(d));
    }
    return ms;
}

inline Net init_params(const NetSpec& spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    return init_params(spec, rng);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<double> m;
    std::vector<double> v;
};

// One bias-corrected Adam update over parallel lists of parameter and
// gradient blocks.
inline void adam_step(const std::vector<std::span<double>>& params, const std::vector<std::span<const double>>& grads,
                      AdamState& st)
{
    if (params.size() != grads.size()) throw InvalidArgument("adam_step: parameter/gradient block count mismatch");
    std::size_t total = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].size() != grads[i].size()) throw InvalidArgument("adam_step: block shape mismatch");
        total += params[i].size();
    }
    if (st.m.empty() && st.step == 0) {
        st.m.assign(total, 0.0);
        st.v.assign(total, 0.0);
    }
    if (st.m.size() != total || st.v.size() != total) throw InvalidArgument("adam_step: optimizer state shape mismatch");

    ++st.step;
    const double t = static_cast<double>(st.step);
    const double bc1 = 1.0 - std::pow(st.beta1, t);
    const double bc2 = 1.0 - std::pow(st.beta2, t);
    std::size_t k = 0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i];
        auto g = grads[i];
        for (std::size_t j = 0; j < p.size(); ++j, ++k) {
            st.m[k] = st.beta1 * st.m[k] + (1.0 - st.beta1) * g[j];
            st.v[k] = st.beta2 * st.v[k] + (1.0 - st.beta2) * g[j] * g[j];
            const double mhat = st.m[k] / bc1;
            const double vhat = st.v[k] / bc2;
            p[j] -= st.learning_rate * mhat / (std::sqrt(vhat) + st.epsilon);
        }
    }
}

template <class T>
std::vector<std::span<double>> param_blocks(T& model)
{
    std::vector<std::span<double>> out;
    visit_params(model, [&](std::span<double> s) { out.push_back(s); });
    return out;
}

template <class T>
std::vector<std::span<const double>> param_blocks_const(const T& model)
{
    std::vector<std::span<const double>> out;
    visit_params(model, [&](std::span<const double> s) { out.push_back(s); });
    return out;
}

template <class T>
void adam_step(T& model, const T& grad, AdamState& st)
{
    adam_step(param_blocks(model), param_blocks_const(grad), st);
}

template <class T>
std::vector<double> flatten(const T& model)
{
    std::vector<double> out;
    visit_params(model, [&](std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
    return out;
}

template <class T>
void unflatten(T& model, std::span<const double> values)
{
    std::size_t k = 0;
    visit_params(model, [&](std::span<double> s) {
        if (k + s.size() > values.size()) throw InvalidArgument("unflatten: too few values");
        std::copy(values.begin() + static_cast<std::ptrdiff_t>(k),
                  values.begin() + static_cast<std::ptrdiff_t>(k + s.size()), s.begin());
        k += s.size();
    });
    if (k != values.size()) throw InvalidArgument("unflatten: too many values");
}

// ---------------------------------------------------------------------------
// JSON checkpoint form: shapes plus row-major values.

inline nlohmann::json matrix_to_json(const Eigen::MatrixXd& m)
{
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"values", v}};
}

inline Eigen::MatrixXd matrix_from_json(const nlohmann::json& j)
{
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto v = j.at("values").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) throw InputError("checkpoint: matrix size mismatch");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

inline nlohmann::json to_json(const DenseNet& net)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers)
        layers.push_back({{"weight", matrix_to_json(l.weight)},
                          {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
    return {{"type", "dense"}, {"activation", to_string(net.activation)}, {"layers", layers}};
}

inline nlohmann::json to_json(const Net& net)
{
    if (const auto* d = std::get_if<DenseNet>(&net)) return to_json(*d);
    const auto& ms = std::get<MultiscaleNet>(net);
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : ms.subnets) subs.push_back(to_json(s));
    return {{"type", "multiscale"}, {"scales", ms.scales}, {"subnets", subs}};
}

inline DenseNet dense_from_json(const nlohmann::json& j)
{
    DenseNet d;
    d.activation = parse_activation(j.at("activation").get<std::string>());
    for (const auto& l : j.at("layers")) {
        DenseLayer layer;
        layer.weight = matrix_from_json(l.at("weight"));
        const auto b = l.at("bias").get<std::vector<double>>();
        layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size()));
        if (layer.bias.size() != layer.weight.rows()) throw InputError("checkpoint: bias size mismatch");
        d.layers.push_back(std::move(layer));
    }
    if (d.layers.empty()) throw InputError("checkpoint: dense net without layers");
    return d;
}

inline Net net_from_json(const nlohmann::json& j)
{
    const auto type = j.at("type").get<std::string>();
    if (type == "dense") return dense_from_json(j);
    if (type != "multiscale") throw InputError("checkpoint: unknown net type '" + type + "'");
    MultiscaleNet ms;
    ms.scales = j.at("scales").get<std::vector<double>>();
    for (const auto& s : j.at("subnets")) ms.subnets.push_back(dense_from_json(s));
    if (ms.scales.size() != ms.subnets.size() || ms.subnets.empty())
        throw InputError("checkpoint: scale/subnet count mismatch");
    return ms;
}

} // namespace msdon
