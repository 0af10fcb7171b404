#pragma once

// Linear shear-building models and reference response solvers.
//
// The equation of motion is  M x'' + C x' + K x = P(t),  x(0) = x'(0) = 0,
// with lumped floor masses, inter-story shear stiffnesses and Rayleigh
// damping C = a0 M + a1 K. Two solution routes are provided: direct
// Newmark-beta integration of the coupled system and modal superposition
// over mass-normalized vibration modes.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "msdon/error.hpp"
#include "msdon/time_series.hpp"

namespace msdon {

struct ShearBuildingModel {
    std::vector<double> masses;      // kg, floor 1 is the lowest
    std::vector<double> stiffnesses; // N/m, story i connects floor i-1 (or ground) to floor i
    double rayleigh_a0 = 0.0;        // 1/s
    double rayleigh_a1 = 0.0;        // s

    std::size_t n_floors() const { return masses.size(); }

    Eigen::MatrixXd mass_matrix() const
    {
        const auto n = static_cast<Eigen::Index>(masses.size());
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) m(i, i) = masses[i];
        return m;
    }

    // Tridiagonal: diagonal k_i + k_{i+1} (k_{n+1} = 0), off-diagonal -k_{i+1}.
    Eigen::MatrixXd stiffness_matrix() const
    {
        const auto n = static_cast<Eigen::Index>(stiffnesses.size());
        Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            k(i, i) = stiffnesses[i] + (i + 1 < n ? stiffnesses[i + 1] : 0.0);
            if (i + 1 < n) {
                k(i, i + 1) = -stiffnesses[i + 1];
                k(i + 1, i) = -stiffnesses[i + 1];
            }
        }
        return k;
    }

    Eigen::MatrixXd damping_matrix() const
    {
        return rayleigh_a0 * mass_matrix() + rayleigh_a1 * stiffness_matrix();
    }
};

inline ShearBuildingModel build_shear_building(std::size_t n_floors, std::vector<double> masses,
                                               std::vector<double> stiffnesses, double a0, double a1)
{
    detail::require(n_floors >= 1, "build_shear_building: n_floors must be positive");
    detail::require(masses.size() == n_floors, "build_shear_building: masses length != n_floors");
    detail::require(stiffnesses.size() == n_floors, "build_shear_building: stiffnesses length != n_floors");
    for (double m : masses)
        detail::require(m > 0.0 && std::isfinite(m), "build_shear_building: masses must be positive");
    for (double k : stiffnesses)
        detail::require(k > 0.0 && std::isfinite(k), "build_shear_building: stiffnesses must be positive");
    detail::require(a0 >= 0.0 && a1 >= 0.0, "build_shear_building: Rayleigh coefficients must be >= 0");
    return ShearBuildingModel{std::move(masses), std::move(stiffnesses), a0, a1};
}

// Rayleigh coefficients giving damping ratio zeta at the two angular frequencies wi, wj.
inline std::pair<double, double> rayleigh_coefficients(double wi, double wj, double zeta)
{
    detail::require(wi > 0.0 && wj > 0.0, "rayleigh_coefficients: frequencies must be positive");
    const double a1 = 2.0 * zeta / (wi + wj);
    const double a0 = a1 * wi * wj;
    return {a0, a1};
}

struct ModalBasis {
    std::vector<double> frequencies; // rad/s, ascending
    Eigen::MatrixXd shapes;          // column n is phi_n, phi^T M phi = I
    std::vector<double> damping_ratios;

    std::size_t n_modes() const { return frequencies.size(); }
};

namespace detail {

inline ModalBasis undamped_modes(const ShearBuildingModel& model)
{
    const auto n = static_cast<Eigen::Index>(model.n_floors());
    require(n >= 1, "modal_analysis: empty model");
    // M is diagonal: solve the symmetric problem M^{-1/2} K M^{-1/2} v = w^2 v.
    Eigen::VectorXd inv_sqrt_m(n);
    for (Eigen::Index i = 0; i < n; ++i) inv_sqrt_m(i) = 1.0 / std::sqrt(model.masses[i]);
    const Eigen::MatrixXd s = inv_sqrt_m.asDiagonal() * model.stiffness_matrix() * inv_sqrt_m.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw NumericError("modal_analysis: eigen-solver failed to converge");

    ModalBasis basis;
    basis.frequencies.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double lambda = eig.eigenvalues()(i);
        if (!(lambda > 0.0)) throw NumericError("modal_analysis: non-positive eigenvalue (ill-conditioned model)");
        basis.frequencies[i] = std::sqrt(lambda);
    }
    basis.shapes = inv_sqrt_m.asDiagonal() * eig.eigenvectors();
    // Fix the sign so the top-floor component is non-negative.
    for (Eigen::Index j = 0; j < n; ++j)
        if (basis.shapes(n - 1, j) < 0.0) basis.shapes.col(j) *= -1.0;
    return basis;
}

} // namespace detail

// Modal damping ratios implied by the model's Rayleigh coefficients.
inline ModalBasis modal_analysis(const ShearBuildingModel& model)
{
    ModalBasis basis = detail::undamped_modes(model);
    basis.damping_ratios.resize(basis.n_modes());
    for (std::size_t i = 0; i < basis.n_modes(); ++i) {
        const double w = basis.frequencies[i];
        basis.damping_ratios[i] = model.rayleigh_a0 / (2.0 * w) + model.rayleigh_a1 * w / 2.0;
    }
    return basis;
}

// Explicit per-mode damping ratios, one per floor.
inline ModalBasis modal_analysis(const ShearBuildingModel& model, const std::vector<double>& zeta)
{
    detail::require(zeta.size() == model.n_floors(), "modal_analysis: need one damping ratio per mode");
    for (double z : zeta) detail::require(z >= 0.0 && z < 1.0, "modal_analysis: damping ratio must be in [0, 1)");
    ModalBasis basis = detail::undamped_modes(model);
    basis.damping_ratios = zeta;
    return basis;
}

// Desk-scale stand-in building: 8 stories, 2.0e5 kg floors, 2.5e8 N/m stories,
// 2% Rayleigh damping anchored on the first two modes. Natural frequencies
// span roughly 1 to 11 Hz.
inline ShearBuildingModel default_building(std::size_t n_floors = 8, double mass = 2.0e5, double stiffness = 2.5e8,
                                           double zeta = 0.02)
{
    ShearBuildingModel m = build_shear_building(n_floors, std::vector<double>(n_floors, mass),
                                                std::vector<double>(n_floors, stiffness), 0.0, 0.0);
    const ModalBasis modes = detail::undamped_modes(m);
    const double w1 = modes.frequencies[0];
    const double w2 = modes.n_modes() > 1 ? modes.frequencies[1] : w1;
    auto [a0, a1] = rayleigh_coefficients(w1, w2, zeta);
    m.rayleigh_a0 = a0;
    m.rayleigh_a1 = a1;
    return m;
}

struct NewmarkParams {
    double beta = 0.25;
    double gamma = 0.5;
    double dt = 0.01;
};

// Loads or responses laid out as floors x time steps.
struct LoadHistory {
    double dt = 1.0;
    Eigen::MatrixXd values;

    Eigen::Index n_steps() const { return values.cols(); }
};

struct ResponseHistory {
    double dt = 1.0;
    Eigen::MatrixXd displacements;
    Eigen::MatrixXd velocities;
    Eigen::MatrixXd accelerations;

    Eigen::Index n_steps() const { return displacements.cols(); }
    std::vector<double> floor(std::size_t i) const
    {
        std::vector<double> out(static_cast<std::size_t>(displacements.cols()));
        for (Eigen::Index t = 0; t < displacements.cols(); ++t)
            out[static_cast<std::size_t>(t)] = displacements(static_cast<Eigen::Index>(i), t);
        return out;
    }
};

namespace detail {

inline void check_newmark(const NewmarkParams& p, double load_dt)
{
    require(p.dt > 0.0 && std::isfinite(p.dt), "newmark: dt must be positive");
    require(p.beta > 0.0 && p.beta <= 0.5, "newmark: beta must be in (0, 0.5] for the implicit form");
    require(p.gamma >= 0.0 && p.gamma <= 1.0, "newmark: gamma must be in [0, 1]");
    require(std::abs(load_dt - p.dt) <= 1e-9 * p.dt, "newmark: load must be sampled at params.dt");
}

} // namespace detail

inline ResponseHistory newmark_solve(const ShearBuildingModel& model, const LoadHistory& load, const NewmarkParams& params)
{
    detail::check_newmark(params, load.dt);
    const auto n = static_cast<Eigen::Index>(model.n_floors());
    detail::require(load.values.rows() == n, "newmark_solve: load rows != n_floors");
    const Eigen::Index steps = load.values.cols();
    detail::require(steps >= 1, "newmark_solve: empty load");

    const double b = params.beta, g = params.gamma, dt = params.dt;
    const Eigen::MatrixXd m = model.mass_matrix();
    const Eigen::MatrixXd k = model.stiffness_matrix();
    const Eigen::MatrixXd c = model.damping_matrix();

    const Eigen::MatrixXd k_eff = k + (g / (b * dt)) * c + (1.0 / (b * dt * dt)) * m;
    Eigen::LLT<Eigen::MatrixXd> llt(k_eff);
    if (llt.info() != Eigen::Success) throw NumericError("newmark_solve: singular effective stiffness");

    ResponseHistory out;
    out.dt = dt;
    out.displacements = Eigen::MatrixXd::Zero(n, steps);
    out.velocities = Eigen::MatrixXd::Zero(n, steps);
    out.accelerations = Eigen::MatrixXd::Zero(n, steps);

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd a = m.diagonal().cwiseInverse().cwiseProduct(load.values.col(0));
    out.accelerations.col(0) = a;

    const double c1 = 1.0 / (b * dt * dt), c2 = 1.0 / (b * dt), c3 = 1.0 / (2.0 * b) - 1.0;
    const double c4 = g / (b * dt), c5 = g / b - 1.0, c6 = dt * (g / (2.0 * b) - 1.0);
    for (Eigen::Index s = 1; s < steps; ++s) {
        const Eigen::VectorXd rhs = load.values.col(s) + m * (c1 * x + c2 * v + c3 * a) + c * (c4 * x + c5 * v + c6 * a);
        const Eigen::VectorXd x_new = llt.solve(rhs);
        const Eigen::VectorXd a_new = c1 * (x_new - x) - c2 * v - c3 * a;
        v += dt * ((1.0 - g) * a + g * a_new);
        x = x_new;
        a = a_new;
        out.displacements.col(s) = x;
        out.velocities.col(s) = v;
        out.accelerations.col(s) = a;
    }
    if (!out.displacements.allFinite()) throw NumericError("newmark_solve: non-finite response");
    return out;
}

namespace detail {

// Newmark recursion for q'' + 2 zeta w q' + w^2 q = p(t), zero initial state.
inline void newmark_sdof(double w, double zeta, const Eigen::Ref<const Eigen::VectorXd>& p, const NewmarkParams& prm,
                         Eigen::Ref<Eigen::VectorXd> q, Eigen::Ref<Eigen::VectorXd> qd, Eigen::Ref<Eigen::VectorXd> qdd)
{
    const double b = prm.beta, g = prm.gamma, dt = prm.dt;
    const double kk = w * w, cc = 2.0 * zeta * w;
    const double k_eff = kk + (g / (b * dt)) * cc + 1.0 / (b * dt * dt);
    const double c1 = 1.0 / (b * dt * dt), c2 = 1.0 / (b * dt), c3 = 1.0 / (2.0 * b) - 1.0;
    const double c4 = g / (b * dt), c5 = g / b - 1.0, c6 = dt * (g / (2.0 * b) - 1.0);
    double x = 0.0, v = 0.0, a = p(0);
    q(0) = 0.0;
    qd(0) = 0.0;
    qdd(0) = a;
    for (Eigen::Index s = 1; s < p.size(); ++s) {
        const double rhs = p(s) + (c1 * x + c2 * v + c3 * a) + cc * (c4 * x + c5 * v + c6 * a);
        const double x_new = rhs / k_eff;
        const double a_new = c1 * (x_new - x) - c2 * v - c3 * a;
        v += dt * ((1.0 - g) * a + g * a_new);
        x = x_new;
        a = a_new;
        q(s) = x;
        qd(s) = v;
        qdd(s) = a;
    }
}

} // namespace detail

// Integrates the first n_modes decoupled modal equations and recombines
// x(t) = sum_n phi_n q_n(t).
inline ResponseHistory modal_superposition_solve(const ShearBuildingModel& model, const ModalBasis& basis,
                                                 std::size_t n_modes, const LoadHistory& load,
                                                 const NewmarkParams& params)
{
    detail::check_newmark(params, load.dt);
    const auto n = static_cast<Eigen::Index>(model.n_floors());
    detail::require(n_modes >= 1 && n_modes <= basis.n_modes() && n_modes <= model.n_floors(),
                    "modal_superposition_solve: n_modes out of range");
    detail::require(load.values.rows() == n, "modal_superposition_solve: load rows != n_floors");
    const Eigen::Index steps = load.values.cols();
    detail::require(steps >= 1, "modal_superposition_solve: empty load");

    const auto nm = static_cast<Eigen::Index>(n_modes);
    const Eigen::MatrixXd phi = basis.shapes.leftCols(nm);
    const Eigen::MatrixXd modal_load = phi.transpose() * load.values; // modes x steps
    Eigen::MatrixXd q(nm, steps), qd(nm, steps), qdd(nm, steps);
    for (Eigen::Index j = 0; j < nm; ++j) {
        Eigen::VectorXd pj = modal_load.row(j).transpose();
        Eigen::VectorXd a(steps), b(steps), c(steps);
        detail::newmark_sdof(basis.frequencies[static_cast<std::size_t>(j)],
                             basis.damping_ratios[static_cast<std::size_t>(j)], pj, params, a, b, c);
        q.row(j) = a.transpose();
        qd.row(j) = b.transpose();
        qdd.row(j) = c.transpose();
    }
    ResponseHistory out;
    out.dt = params.dt;
    out.displacements = phi * q;
    out.velocities = phi * qd;
    out.accelerations = phi * qdd;
    return out;
}

// Effective earthquake load P_i(t) = -m_i * ug''(t).
inline LoadHistory ground_motion_load(const ShearBuildingModel& model, const TimeSeries& ground_accel)
{
    detail::require(!ground_accel.empty(), "ground_motion_load: empty acceleration record");
    const auto n = static_cast<Eigen::Index>(model.n_floors());
    const auto steps = static_cast<Eigen::Index>(ground_accel.size());
    LoadHistory load;
    load.dt = ground_accel.dt;
    load.values.resize(n, steps);
    for (Eigen::Index s = 0; s < steps; ++s) {
        const double ug = ground_accel.values[static_cast<std::size_t>(s)];
        detail::require(std::isfinite(ug), "ground_motion_load: non-finite acceleration");
        for (Eigen::Index i = 0; i < n; ++i) load.values(i, s) = -model.masses[static_cast<std::size_t>(i)] * ug;
    }
    return load;
}

// Displacement response of every floor to a ground acceleration record,
// integrated at the record's own time step.
inline ResponseHistory seismic_response(const ShearBuildingModel& model, const TimeSeries& ground_accel,
                                        double beta = 0.25, double gamma = 0.5)
{
    return newmark_solve(model, ground_motion_load(model, ground_accel), NewmarkParams{beta, gamma, ground_accel.dt});
}

} // namespace msdon
