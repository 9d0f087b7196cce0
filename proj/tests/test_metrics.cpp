#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swarm/eval/metrics.hpp"
#include "test_util.hpp"

using namespace swarm;
using namespace swarm::eval;
namespace tu = swarm::testutil;

namespace {

std::vector<TimedPose4> series(int n, double dt, auto f) {
    std::vector<TimedPose4> out;
    for (int k = 0; k < n; ++k) out.push_back({k * dt, f(k)});
    return out;
}

}  // namespace

TEST_CASE("compute_re: exact series, constant offset, brute-force agreement") {
    auto gt = series(100, 0.05, [](int k) { return Pose4{0.1 * k, 0.2 * k, 1.0, 0.01 * k}; });
    auto re0 = compute_re(gt, gt, 0.025);
    CHECK(re0.n == 100);
    CHECK(re0.rmse_xyz.norm() == 0.0);
    CHECK(re0.rmse_yaw == 0.0);

    auto offset = gt;
    for (auto& p : offset) p.pose.x += 0.1;
    auto re1 = compute_re(offset, gt, 0.025);
    CHECK(re1.rmse_xyz.x() == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(re1.rmse_xyz.y() == 0.0);
    CHECK(re1.rmse_xyz.z() == 0.0);
}

TEST_CASE("compute_re matches brute force on random series") {
    auto rng = tu::make_rng(32);
    auto gt = series(200, 0.05, [&](int k) { return tu::random_pose4(rng, 5.0); });
    std::vector<TimedPose4> est = gt;
    for (auto& p : est) {
        p.pose.x += tu::uniform(rng, -0.2, 0.2);
        p.pose.y += tu::uniform(rng, -0.2, 0.2);
        p.pose.z += tu::uniform(rng, -0.2, 0.2);
        p.pose.yaw = wrap_angle(p.pose.yaw + tu::uniform(rng, -0.1, 0.1));
    }
    auto got = compute_re(est, gt, 0.025);

    double sx = 0, sy = 0, sz = 0, syaw = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        double dx = est[i].pose.x - gt[i].pose.x;
        double dy = est[i].pose.y - gt[i].pose.y;
        double dz = est[i].pose.z - gt[i].pose.z;
        double dpsi = wrap_angle(est[i].pose.yaw - gt[i].pose.yaw);
        sx += dx * dx;
        sy += dy * dy;
        sz += dz * dz;
        syaw += dpsi * dpsi;
    }
    const double n = static_cast<double>(gt.size());
    CHECK(got.rmse_xyz.x() == doctest::Approx(std::sqrt(sx / n)).epsilon(1e-12));
    CHECK(got.rmse_xyz.y() == doctest::Approx(std::sqrt(sy / n)).epsilon(1e-12));
    CHECK(got.rmse_xyz.z() == doctest::Approx(std::sqrt(sz / n)).epsilon(1e-12));
    CHECK(got.rmse_yaw == doctest::Approx(std::sqrt(syaw / n)).epsilon(1e-12));
}

TEST_CASE("compute_ate basics and brute force") {
    auto gt = series(150, 0.05, [](int k) { return Pose4{0.2 * k, 0.0, 1.0, 0.0}; });
    auto a0 = compute_ate(gt, gt, 0.025);
    CHECK(a0.rmse_pos == 0.0);
    CHECK(a0.rmse_yaw == 0.0);

    auto shifted = gt;
    for (auto& p : shifted) p.pose.x += 0.1;
    auto a1 = compute_ate(shifted, gt, 0.025);
    CHECK(a1.rmse_pos == doctest::Approx(0.1).epsilon(1e-12));

    auto rng = tu::make_rng(33);
    auto est = gt;
    for (auto& p : est) {
        p.pose.x += tu::uniform(rng, -0.3, 0.3);
        p.pose.z += tu::uniform(rng, -0.3, 0.3);
        p.pose.yaw = wrap_angle(p.pose.yaw + tu::uniform(rng, -0.2, 0.2));
    }
    auto got = compute_ate(est, gt, 0.025);
    double sp = 0, sy = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        sp += (est[i].pose.position() - gt[i].pose.position()).squaredNorm();
        double dpsi = wrap_angle(est[i].pose.yaw - gt[i].pose.yaw);
        sy += dpsi * dpsi;
    }
    const double n = static_cast<double>(gt.size());
    CHECK(got.rmse_pos == doctest::Approx(std::sqrt(sp / n)).epsilon(1e-12));
    CHECK(got.rmse_yaw == doctest::Approx(std::sqrt(sy / n)).epsilon(1e-12));
}

TEST_CASE("compute_drift endpoints and degenerate cases") {
    auto gt = series(101, 1.0, [](int k) { return Pose4{1.0 * k, 0.0, 0.0, 0.0}; });  // 100 m
    CHECK(*compute_drift(gt, gt, 0.5) == 0.0);

    auto est = gt;
    est.back().pose.y += 1.0;  // 1 m final error
    CHECK(*compute_drift(est, gt, 0.5) == doctest::Approx(0.01).epsilon(1e-12));

    // Zero path length is undefined.
    auto still = series(10, 1.0, [](int) { return Pose4{}; });
    CHECK_FALSE(compute_drift(still, still, 0.5).has_value());

    // Empty overlap is undefined.
    auto late = series(10, 1.0, [](int k) { return Pose4{1.0 * k, 0, 0, 0}; });
    for (auto& p : late) p.t += 1000.0;
    CHECK_FALSE(compute_drift(late, gt, 0.4).has_value());
}

TEST_CASE("alignment tolerance bounds the timestamp mismatch") {
    auto gt = series(100, 0.05, [](int k) { return Pose4{0.1 * k, 0, 0, 0}; });
    auto est = gt;
    for (auto& p : est) p.t += 0.024;  // still within a 25 ms tolerance
    CHECK(compute_ate(est, gt, 0.025).n == 100);
    for (auto& p : est) p.t += 0.006;  // 30 ms and 20 ms from the neighbors
    CHECK(compute_ate(est, gt, 0.01).n == 0);
}
