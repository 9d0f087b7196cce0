#include "swarm/est/solver.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>

namespace swarm::est {

namespace {
Pose4 apply_step(const Pose4& p, const std::array<int, 4>& idx, const Eigen::VectorXd& h) {
    Pose4 q = p;
    if (idx[0] >= 0) q.x += h(idx[0]);
    if (idx[1] >= 0) q.y += h(idx[1]);
    if (idx[2] >= 0) q.z += h(idx[2]);
    if (idx[3] >= 0) q.yaw = wrap_angle(q.yaw + h(idx[3]));
    return q;
}
}  // namespace

GraphProblem::GraphProblem(const EstimatorGraph& g, const SolverOptions& opt,
                           std::set<DroneId> frozen_yaw,
                           std::optional<std::set<DroneId>> only_drones, ProblemFilter filter)
    : g_(g), opt_(opt), frozen_yaw_(std::move(frozen_yaw)) {
    auto active_drone = [&](DroneId d) { return !only_drones || only_drones->count(d) > 0; };

    for (const auto& [key, pose] : g.states) {
        std::array<int, 4> idx = {-1, -1, -1, -1};
        const bool is_anchor = g.anchor && *g.anchor == key;
        if (!is_anchor && active_drone(key.drone)) {
            idx[0] = n_params_++;
            idx[1] = n_params_++;
            idx[2] = n_params_++;
            if (!frozen_yaw_.count(key.drone)) idx[3] = n_params_++;
        }
        param_index_[key] = idx;
    }

    auto add_block = [&](Block::Kind kind, size_t i, VarKey a, VarKey b, int rows, bool robust) {
        if (!g.has_var(a) || !g.has_var(b)) return;
        Block blk{kind, i, a, b, n_rows_, rows, robust};
        blocks_.push_back(blk);
        n_rows_ += rows;
    };
    auto excluded = [](const std::set<size_t>* s, size_t i) { return s && s->count(i) > 0; };

    for (size_t i = 0; i < g.odometry.size(); ++i) {
        if (excluded(filter.excluded_odom, i)) continue;
        const auto& o = g.odometry[i];
        add_block(Block::Kind::Odometry, i, {o.e.drone, o.tick_prev}, {o.e.drone, o.tick}, 4, false);
    }
    if (filter.use_uwb) {
        for (size_t i = 0; i < g.distances.size(); ++i) {
            if (excluded(filter.excluded_dist, i)) continue;
            const auto& x = g.distances[i];
            add_block(Block::Kind::Distance, i, {x.e.i, x.tick}, {x.e.j, x.tick}, 1, true);
        }
    }
    if (filter.use_detections) {
        for (size_t i = 0; i < g.detections.size(); ++i) {
            if (excluded(filter.excluded_det, i)) continue;
            const auto& x = g.detections[i];
            add_block(Block::Kind::Detection, i, {x.e.observer, x.tick}, {x.e.target, x.tick}, 3,
                      true);
        }
    }
    if (filter.use_map) {
        for (size_t i = 0; i < g.map_edges.size(); ++i) {
            if (excluded(filter.excluded_map, i)) continue;
            const auto& x = g.map_edges[i];
            add_block(Block::Kind::MapEdge, i, {x.e.from_drone, x.from_tick},
                      {x.e.to_drone, x.to_tick}, 4, true);
        }
    }
}

void GraphProblem::evaluate(const StateMap& states, const Block& b, Eigen::VectorXd* r,
                            Eigen::MatrixXd* Ja, Eigen::MatrixXd* Jb) const {
    const Pose4& pa = states.at(b.var_a);
    const Pose4& pb = states.at(b.var_b);
    switch (b.kind) {
        case Block::Kind::Odometry: {
            const auto& e = g_.odometry[b.index].e;
            *r = residual_odometry(e, pa, pb);
            if (Ja) {
                Eigen::Matrix4d A, B;
                jacobian_odometry(e, pa, pb, &A, &B);
                *Ja = A;
                *Jb = B;
            }
            break;
        }
        case Block::Kind::Distance: {
            const auto& e = g_.distances[b.index].e;
            r->resize(1);
            (*r)(0) = residual_distance(e, pa.position(), pb.position());
            if (Ja) {
                Eigen::RowVector4d A, B;
                jacobian_distance(e, pa, pb, &A, &B);
                *Ja = A;
                *Jb = B;
            }
            break;
        }
        case Block::Kind::Detection: {
            const auto& e = g_.detections[b.index].e;
            auto res = residual_detection(e, pa, pb);
            if (!res) {  // coincident positions: no influence at this state
                r->setZero(3);
                if (Ja) {
                    Ja->setZero(3, 4);
                    Jb->setZero(3, 4);
                }
                break;
            }
            *r = *res;
            if (Ja) {
                Eigen::Matrix<double, 3, 4> A, B;
                jacobian_detection(e, pa, pb, &A, &B);
                *Ja = A;
                *Jb = B;
            }
            break;
        }
        case Block::Kind::MapEdge: {
            const auto& e = g_.map_edges[b.index].e;
            *r = residual_map_edge(e, pa, pb);
            if (Ja) {
                Eigen::Matrix4d A, B;
                jacobian_map_edge(e, pa, pb, &A, &B);
                *Ja = A;
                *Jb = B;
            }
            break;
        }
    }
}

double GraphProblem::cost(const StateMap& states) const {
    double total = 0.0;
    Eigen::VectorXd r;
    for (const auto& b : blocks_) {
        evaluate(states, b, &r, nullptr, nullptr);
        const double s = r.squaredNorm();
        total += b.robust ? huber(s, opt_.huber_delta) : s;
    }
    return total;
}

SolveStats GraphProblem::solve(StateMap* states) const {
    SolveStats stats;
    StateMap x = *states;
    double current_cost = cost(x);
    stats.initial_cost = current_cost;
    stats.final_cost = current_cost;

    if (n_params_ == 0) {
        stats.converged = true;
        stats.reason = "no free parameters";
        return stats;
    }

    double lambda = opt_.init_lambda;
    Eigen::VectorXd r;
    Eigen::MatrixXd Ja, Jb;

    for (int iter = 0; iter < opt_.max_iterations; ++iter) {
        stats.iterations = iter + 1;

        // Assemble robust-weighted normal equations at x.
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(n_params_);
        Eigen::VectorXd diag = Eigen::VectorXd::Zero(n_params_);
        std::vector<Eigen::Triplet<double>> h_trips;

        // Dense accumulation of per-block JtJ into triplets.
        for (const auto& b : blocks_) {
            evaluate(x, b, &r, &Ja, &Jb);
            double w = 1.0;
            if (b.robust) w = huber_weight(r.squaredNorm(), opt_.huber_delta);
            const auto& ia = param_index_.at(b.var_a);
            const auto& ib = param_index_.at(b.var_b);

            // Collect active (global index, local column, which matrix).
            struct Col {
                int g, l;
                const Eigen::MatrixXd* J;
            };
            std::array<Col, 8> cols;
            int nc = 0;
            for (int c = 0; c < 4; ++c) {
                if (ia[c] >= 0) cols[nc++] = {ia[c], c, &Ja};
            }
            for (int c = 0; c < 4; ++c) {
                if (ib[c] >= 0) cols[nc++] = {ib[c], c, &Jb};
            }
            for (int p = 0; p < nc; ++p) {
                const Eigen::VectorXd jp = cols[p].J->col(cols[p].l);
                grad(cols[p].g) += w * jp.dot(r);
                for (int q = 0; q < nc; ++q) {
                    const Eigen::VectorXd jq = cols[q].J->col(cols[q].l);
                    h_trips.emplace_back(cols[p].g, cols[q].g, w * jp.dot(jq));
                }
            }
        }

        stats.gradient_norm = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
        if (stats.gradient_norm < opt_.gradient_tol) {
            stats.converged = true;
            stats.reason = "gradient";
            break;
        }

        Eigen::SparseMatrix<double> H(n_params_, n_params_);
        H.setFromTriplets(h_trips.begin(), h_trips.end());
        for (int i = 0; i < n_params_; ++i) diag(i) = H.coeff(i, i);

        bool accepted = false;
        while (lambda <= opt_.lambda_max) {
            Eigen::SparseMatrix<double> Hd = H;
            for (int i = 0; i < n_params_; ++i) {
                Hd.coeffRef(i, i) = diag(i) + lambda * std::max(diag(i), 1e-6);
            }
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> chol(Hd);
            if (chol.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            Eigen::VectorXd h = chol.solve(-grad);
            if (chol.info() != Eigen::Success || !h.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            StateMap x_new = x;
            for (auto& [key, pose] : x_new) pose = apply_step(pose, param_index_.at(key), h);
            const double new_cost = cost(x_new);
            if (std::isfinite(new_cost) && new_cost <= current_cost) {
                const double rel = (current_cost - new_cost) / std::max(current_cost, 1e-300);
                x = std::move(x_new);
                current_cost = new_cost;
                lambda = std::max(lambda / 3.0, 1e-12);
                accepted = true;
                if (rel < opt_.rel_cost_tol) {
                    stats.converged = true;
                    stats.reason = "cost";
                }
                break;
            }
            lambda *= 4.0;
        }
        if (!accepted) {
            // No downhill step at maximum damping: either at a minimum (small
            // gradient or cost at the numerical floor) or genuinely stuck.
            stats.converged = stats.gradient_norm < 1e-4 || current_cost < 1e-10;
            stats.reason = stats.converged ? "stalled at minimum" : "stalled";
            break;
        }
        if (stats.converged) break;
    }
    if (!stats.converged && stats.reason.empty()) {
        stats.converged = true;  // ran out of iterations while still improving
        stats.reason = "max iterations";
    }

    stats.final_cost = current_cost;
    *states = std::move(x);
    return stats;
}

}  // namespace swarm::est
