#pragma once

#include <Eigen/Core>

#include <functional>

namespace mww {

using Objective = std::function<double(const Eigen::VectorXd&)>;
/// Returns the value and writes the gradient into its second argument.
using ObjectiveWithGradient = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct MinimizerOptions {
    double initial_step = 0.1;
    double x_tolerance = 1e-8;
    double f_tolerance = 1e-12;
    double gradient_tolerance = 1e-9;
    int max_iterations = 4000;
};

struct MinimizerResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Derivative-free simplex search (Nelder-Mead, standard coefficients).
/// The objective may return +inf to reject a point; the start must be finite.
MinimizerResult nelder_mead(const Objective& f, const Eigen::VectorXd& start,
                            const MinimizerOptions& options = {});

/// Quasi-Newton (BFGS) minimization inside the box [lower, upper], with
/// projected steps and backtracking. Used when the dimension is too large
/// for a simplex search.
MinimizerResult bfgs_box(const ObjectiveWithGradient& f, const Eigen::VectorXd& start,
                         const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                         const MinimizerOptions& options = {});

}  // namespace mww
