#pragma once

#include <optional>
#include <set>
#include <string>

#include "swarm/est/graph.hpp"

namespace swarm::est {

struct SolverOptions {
    int max_iterations = 50;
    double gradient_tol = 1e-8;     // infinity norm of the gradient
    double rel_cost_tol = 1e-9;     // relative decrease on an accepted step
    double init_lambda = 1e-4;
    double lambda_max = 1e12;
    double huber_delta = 1.0;       // whitened units; odometry is unrobustified
};

struct SolveStats {
    bool converged = false;
    int iterations = 0;
    double initial_cost = 0.0;
    double final_cost = 0.0;
    double gradient_norm = 0.0;
    std::string reason;
};

/// Selects which edges participate in one solve. Excluded index sets come
/// from the per-solve residual gate; class switches implement ablations.
struct ProblemFilter {
    bool use_uwb = true;
    bool use_detections = true;
    bool use_map = true;
    const std::set<size_t>* excluded_odom = nullptr;
    const std::set<size_t>* excluded_dist = nullptr;
    const std::set<size_t>* excluded_det = nullptr;
    const std::set<size_t>* excluded_map = nullptr;
};

/// Robust nonlinear least squares over the graph's Pose4 variables:
/// Levenberg-Marquardt damping on the Gauss-Newton normal equations,
/// assembled sparse and factorized with a simplicial Cholesky. The anchor
/// variable contributes no parameters; drones in frozen_yaw keep their yaw
/// columns out of the problem; when only_drones is set, every other
/// drone's variables are held constant.
class GraphProblem {
public:
    GraphProblem(const EstimatorGraph& g, const SolverOptions& opt,
                 std::set<DroneId> frozen_yaw = {},
                 std::optional<std::set<DroneId>> only_drones = std::nullopt,
                 ProblemFilter filter = {});

    /// Total robust cost at the given states.
    double cost(const StateMap& states) const;

    /// Iterates on *states in place; only accepted (cost-decreasing) steps
    /// are committed, so a failed solve leaves the input untouched.
    SolveStats solve(StateMap* states) const;

    int n_params() const { return n_params_; }
    int n_residuals() const { return n_rows_; }

private:
    struct Block {
        enum class Kind { Odometry, Distance, Detection, MapEdge } kind;
        size_t index;   // into the matching graph vector
        VarKey var_a, var_b;
        int row = 0;
        int rows = 0;
        bool robust = false;
    };

    void evaluate(const StateMap& states, const Block& b, Eigen::VectorXd* r,
                  Eigen::MatrixXd* Ja, Eigen::MatrixXd* Jb) const;

    const EstimatorGraph& g_;
    SolverOptions opt_;
    std::set<DroneId> frozen_yaw_;
    std::vector<Block> blocks_;
    std::map<VarKey, std::array<int, 4>> param_index_;  // -1 per frozen component
    int n_params_ = 0;
    int n_rows_ = 0;
};

}  // namespace swarm::est
