#include "mww/optimize.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace mww {

MinimizerResult nelder_mead(const Objective& f, const Eigen::VectorXd& start, const MinimizerOptions& options) {
    const Eigen::Index n = start.size();
    constexpr double reflect = 1.0, expand = 2.0, contract = 0.5, shrink = 0.5;

    std::vector<Eigen::VectorXd> simplex(n + 1, start);
    std::vector<double> values(n + 1);
    MinimizerResult result;
    auto eval = [&](const Eigen::VectorXd& x) {
        ++result.evaluations;
        const double v = f(x);
        return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    };

    for (Eigen::Index i = 0; i < n; ++i) simplex[i + 1][i] += options.initial_step;
    for (Eigen::Index i = 0; i <= n; ++i) values[i] = eval(simplex[i]);

    std::vector<Eigen::Index> order(n + 1);
    for (; result.iterations < options.max_iterations; ++result.iterations) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
        {
            std::vector<Eigen::VectorXd> s(n + 1);
            std::vector<double> v(n + 1);
            for (Eigen::Index i = 0; i <= n; ++i) {
                s[i] = std::move(simplex[order[i]]);
                v[i] = values[order[i]];
            }
            simplex = std::move(s);
            values = std::move(v);
        }

        double spread = 0.0;
        for (Eigen::Index i = 1; i <= n; ++i)
            spread = std::max(spread, (simplex[i] - simplex[0]).cwiseAbs().maxCoeff());
        const double fspread = values[n] - values[0];
        if (spread <= options.x_tolerance && std::isfinite(values[n]) && fspread <= options.f_tolerance) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) centroid += simplex[i];
        centroid /= static_cast<double>(n);

        const Eigen::VectorXd xr = centroid + reflect * (centroid - simplex[n]);
        const double fr = eval(xr);
        if (fr < values[0]) {
            const Eigen::VectorXd xe = centroid + expand * (xr - centroid);
            const double fe = eval(xe);
            if (fe < fr) {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if (fr < values[n - 1]) {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        const bool outside = fr < values[n];
        const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + contract * (xr - centroid))
                                           : Eigen::VectorXd(centroid + contract * (simplex[n] - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : values[n])) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        for (Eigen::Index i = 1; i <= n; ++i) {
            simplex[i] = simplex[0] + shrink * (simplex[i] - simplex[0]);
            values[i] = eval(simplex[i]);
        }
    }

    const auto best = std::min_element(values.begin(), values.end()) - values.begin();
    result.x = simplex[best];
    result.value = values[best];
    return result;
}

MinimizerResult bfgs_box(const ObjectiveWithGradient& f, const Eigen::VectorXd& start,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const MinimizerOptions& options) {
    const Eigen::Index n = start.size();
    auto project = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.cwiseMax(lower).cwiseMin(upper)); };

    MinimizerResult result;
    Eigen::VectorXd x = project(start);
    Eigen::VectorXd grad(n);
    double value = f(x, grad);
    ++result.evaluations;
    Eigen::MatrixXd inv_hessian = Eigen::MatrixXd::Identity(n, n);

    for (; result.iterations < options.max_iterations; ++result.iterations) {
        // Coordinates pinned at a bound with the gradient pushing outward are frozen.
        Eigen::VectorXd free_grad = grad;
        for (Eigen::Index i = 0; i < n; ++i)
            if ((x[i] <= lower[i] && grad[i] > 0.0) || (x[i] >= upper[i] && grad[i] < 0.0)) free_grad[i] = 0.0;
        if (free_grad.cwiseAbs().maxCoeff() <= options.gradient_tolerance) {
            result.converged = true;
            break;
        }

        Eigen::VectorXd direction = -(inv_hessian * free_grad);
        for (Eigen::Index i = 0; i < n; ++i)
            if (free_grad[i] == 0.0) direction[i] = 0.0;
        if (direction.dot(free_grad) >= 0.0) {
            inv_hessian.setIdentity();
            direction = -free_grad;
        }

        double step = 1.0;
        Eigen::VectorXd candidate, candidate_grad(n);
        double candidate_value = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int backtrack = 0; backtrack < 60; ++backtrack, step *= 0.5) {
            candidate = project(x + step * direction);
            candidate_value = f(candidate, candidate_grad);
            ++result.evaluations;
            if (std::isfinite(candidate_value) &&
                candidate_value <= value + 1e-4 * free_grad.dot(candidate - x)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            result.converged = (x - project(x - free_grad)).cwiseAbs().maxCoeff() <= options.x_tolerance;
            break;
        }

        const Eigen::VectorXd s = candidate - x;
        const Eigen::VectorXd y = candidate_grad - grad;
        const double sy = s.dot(y);
        const double improvement = value - candidate_value;
        x = candidate;
        grad = candidate_grad;
        value = candidate_value;
        if (sy > 1e-12 * s.norm() * y.norm()) {
            const double rho = 1.0 / sy;
            const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
            inv_hessian = (I - rho * s * y.transpose()) * inv_hessian * (I - rho * y * s.transpose()) +
                          rho * s * s.transpose();
        }
        if (s.cwiseAbs().maxCoeff() <= options.x_tolerance && improvement <= options.f_tolerance) {
            result.converged = true;
            break;
        }
    }
    result.x = x;
    result.value = value;
    return result;
}

}  // namespace mww
