#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Geometry>

#include <sstream>

#include "swarm/maploc.hpp"
#include "swarm/sim/world.hpp"
#include "test_util.hpp"

using namespace swarm;
using namespace swarm::maploc;
namespace tu = swarm::testutil;

namespace {

Keyframe make_kf(DroneId drone, double t, const Eigen::VectorXd& desc) {
    Keyframe kf;
    kf.drone = drone;
    kf.t = t;
    kf.descriptors.push_back(desc.normalized());
    return kf;
}

Eigen::VectorXd basis_desc(int dim, int axis) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    v(axis) = 1.0;
    return v;
}

/// Extractor with a programmable response, for gate tests.
class FixedExtractor : public RelativePoseExtractor {
public:
    std::optional<PoseExtraction> result;
    std::optional<PoseExtraction> extract(const Keyframe&, const Keyframe&) override {
        return result;
    }
};

sim::Scenario static_pair_scenario(double separation) {
    sim::Scenario sc;
    sc.duration_s = 5.0;
    sim::TrajectorySpec a;
    a.type = sim::TrajectorySpec::Type::Static;
    a.center = {0, 0, 1};
    sim::TrajectorySpec b = a;
    b.center = {separation, 0.1, 1};
    sc.drones = {a, b};
    sc.noise.vio = sim::VioNoiseConfig{0, 0, 0, 0};
    sc.noise.uwb_sigma = 0;
    sc.noise.det_sigma_dir = 0;
    sc.noise.det_sigma_inv_depth_frac = 0;
    sc.noise.desc_sigma = 0;
    sc.oracle.pos_sigma = 0;
    sc.oracle.yaw_sigma = 0;
    return sc;
}

}  // namespace

TEST_CASE("kf_query on empty databases returns nothing") {
    MapLocalizer loc(0, LoopThresholds{}, nullptr, Eigen::Vector4d::Ones());
    auto f = make_kf(0, 10.0, basis_desc(8, 0));
    CHECK_FALSE(loc.kf_query(f, nullptr).has_value());
}

TEST_CASE("kf_query returns the stored keyframe below tau_fl") {
    LoopThresholds th;
    th.tau_fl = 0.5;
    MapLocalizer loc(0, th, nullptr, Eigen::Vector4d::Ones());
    Eigen::VectorXd d0 = basis_desc(8, 0);
    loc.add_keyframe(make_kf(0, 0.0, d0));

    Eigen::VectorXd q = d0;
    q(1) = 0.1;  // distance ~0.1 after normalization
    auto f = make_kf(0, 30.0, q);
    const KeyframeDatabase* db = nullptr;
    auto idx = loc.kf_query(f, &db);
    REQUIRE(idx.has_value());
    CHECK(db->keyframe(*idx).t == 0.0);

    // A distant descriptor stays unmatched.
    auto far = make_kf(0, 40.0, basis_desc(8, 5));
    CHECK_FALSE(loc.kf_query(far, nullptr).has_value());
}

TEST_CASE("kf_query picks the argmin candidate, as a brute-force scan does") {
    LoopThresholds th;
    MapLocalizer loc(0, th, nullptr, Eigen::Vector4d::Ones());
    auto rng = tu::make_rng(21);
    Eigen::VectorXd q = basis_desc(16, 0);
    // Candidate at distance ~0.14 and another at ~0.3.
    Eigen::VectorXd near = q, mid = q;
    near(1) += 0.141;
    mid(2) += 0.31;
    loc.add_keyframe(make_kf(1, 1.0, mid));
    loc.add_keyframe(make_kf(2, 2.0, near));
    for (int i = 0; i < 10; ++i) {
        Eigen::VectorXd r(16);
        for (int c = 0; c < 16; ++c) r(c) = tu::uniform(rng, -1, 1);
        loc.add_keyframe(make_kf(3, 3.0 + i, r));  // chaff
    }

    auto f = make_kf(0, 50.0, q);
    const KeyframeDatabase* db = nullptr;
    auto idx = loc.kf_query(f, &db);
    REQUIRE(idx.has_value());

    // Brute-force scan over everything stored.
    double best = 1e9;
    DroneId best_drone = -1;
    for (const auto* d : {&loc.local_db(), &loc.remote_db()}) {
        for (const auto& kf : d->keyframes()) {
            double dist = (kf.descriptors[0] - f.descriptors[0].normalized()).norm();
            if (dist < best) {
                best = dist;
                best_drone = kf.drone;
            }
        }
    }
    CHECK(db->keyframe(*idx).drone == best_drone);
    CHECK(best_drone == 2);
}

TEST_CASE("kf_query skips temporally adjacent self keyframes") {
    LoopThresholds th;
    th.t_guard = 5.0;
    MapLocalizer loc(0, th, nullptr, Eigen::Vector4d::Ones());
    Eigen::VectorXd d0 = basis_desc(8, 0);
    loc.add_keyframe(make_kf(0, 10.0, d0));
    auto f = make_kf(0, 12.0, d0);  // same drone, 2 s apart
    CHECK_FALSE(loc.kf_query(f, nullptr).has_value());
    auto f2 = make_kf(0, 30.0, d0);
    CHECK(loc.kf_query(f2, nullptr).has_value());
}

TEST_CASE("g_check passes identities and consistent yaw-offset setups") {
    double angle = -1;
    CHECK(g_check(Rot3::identity(), Rot3::identity(), Rot3::identity(), 0.1, &angle));
    CHECK(angle < 1e-9);

    // Level flight, arbitrary world yaws, VIO frames offset in yaw only.
    auto rng = tu::make_rng(22);
    for (int i = 0; i < 50; ++i) {
        double psi_i = tu::uniform(rng, -3, 3), psi_j = tu::uniform(rng, -3, 3);
        double zeta_i = tu::uniform(rng, -3, 3), zeta_j = tu::uniform(rng, -3, 3);
        Rot3 vio_i = rotz(-zeta_i) * rotz(psi_i);
        Rot3 vio_j = rotz(-zeta_j) * rotz(psi_j);
        Rot3 extracted = rotz(-zeta_j) * rotz(psi_i);  // exact PnP of body i in V_j
        CHECK(g_check(extracted, vio_i, vio_j, 1e-6, &angle));
        CHECK(angle < 1e-6);
    }
}

TEST_CASE("g_check is invariant to a joint yaw offset") {
    auto rng = tu::make_rng(23);
    for (int i = 0; i < 20; ++i) {
        Rot3 ext = rotz(tu::uniform(rng, -3, 3)) *
                   Rot3{Eigen::AngleAxisd(0.05, Eigen::Vector3d::UnitX()).toRotationMatrix()};
        Rot3 vio_i = rotz(tu::uniform(rng, -3, 3));
        Rot3 vio_j = rotz(tu::uniform(rng, -3, 3));
        double a0 = 0, a1 = 0;
        g_check(ext, vio_i, vio_j, 0.1, &a0);
        double common = tu::uniform(rng, -3, 3);
        // Applying the same yaw to the incoming VIO and to the prediction
        // (through the extracted pose) must not change the residual angle.
        g_check(ext, vio_i, rotz(common) * vio_j, 0.1, &a1);
        CHECK(a0 == doctest::Approx(a1).epsilon(1e-9));
    }
}

TEST_CASE("g_check rejects a 20-degree roll corruption at 5-degree tolerance") {
    Rot3 roll20{Eigen::AngleAxisd(20.0 * kPi / 180.0, Eigen::Vector3d::UnitX()).toRotationMatrix()};
    Rot3 extracted = rotz(0.3) * roll20;  // corrupted PnP on level flight
    Rot3 vio_i = rotz(0.7);
    Rot3 vio_j = rotz(-0.2);
    double angle = 0;
    CHECK_FALSE(g_check(extracted, vio_i, vio_j, 5.0 * kPi / 180.0, &angle));
    CHECK(angle > 5.0 * kPi / 180.0);
}

TEST_CASE("add_keyframe routes by origin and ignores duplicates") {
    MapLocalizer loc(1, LoopThresholds{}, nullptr, Eigen::Vector4d::Ones());
    loc.add_keyframe(make_kf(1, 0.0, basis_desc(8, 0)));
    CHECK(loc.local_db().size() == 1);
    CHECK(loc.remote_db().size() == 0);
    loc.add_keyframe(make_kf(2, 0.0, basis_desc(8, 1)));
    CHECK(loc.remote_db().size() == 1);
    loc.add_keyframe(make_kf(1, 0.0, basis_desc(8, 2)));  // duplicate (drone, t)
    CHECK(loc.local_db().size() == 1);
    CHECK(loc.stats().duplicates == 1);
}

TEST_CASE("loop_detection stores the keyframe when nothing matches") {
    MapLocalizer loc(0, LoopThresholds{}, nullptr, Eigen::Vector4d::Ones());
    auto edge = loc.process_keyframe(make_kf(0, 0.0, basis_desc(8, 0)));
    CHECK_FALSE(edge.has_value());
    CHECK(loc.local_db().size() == 1);
}

TEST_CASE("co-located keyframes with the noiseless oracle yield an exact edge") {
    auto sc = static_pair_scenario(0.2);
    auto streams = sim::generate_streams(sc);
    sim::SimFrontEnd fe(sc, streams);
    MapLocalizer loc(0, LoopThresholds{}, &fe, Eigen::Vector4d(0.05, 0.05, 0.05, 0.02));

    auto kf0 = fe.make_keyframe(0, 0.0);  // own keyframe, stored locally
    CHECK_FALSE(loc.process_keyframe(kf0).has_value());
    auto kf1 = fe.make_keyframe(1, 0.0);  // remote keyframe queries the local db
    auto edge = loc.process_keyframe(kf1);
    REQUIRE(edge.has_value());
    CHECK(edge->from_drone == 0);
    CHECK(edge->to_drone == 1);

    Pose4 want = relative4(kf0.gt4, kf1.gt4);
    CHECK((edge->rel.position() - want.position()).norm() < 1e-9);
    CHECK(std::abs(wrap_angle(edge->rel.yaw - want.yaw)) < 1e-9);

    // Composing the edge onto the source ground truth reproduces the target.
    Pose4 composed = compose4(kf0.gt4, edge->rel);
    CHECK((composed.position() - kf1.gt4.position()).norm() < 1e-9);
}

TEST_CASE("remote-remote pairs never form an edge") {
    auto sc = static_pair_scenario(0.2);
    auto streams = sim::generate_streams(sc);
    sim::SimFrontEnd fe(sc, streams);
    // Localizer on drone 5: both incoming keyframes are remote.
    MapLocalizer loc(5, LoopThresholds{}, &fe, Eigen::Vector4d::Ones());
    CHECK_FALSE(loc.process_keyframe(fe.make_keyframe(0, 0.0)).has_value());
    CHECK_FALSE(loc.process_keyframe(fe.make_keyframe(1, 0.0)).has_value());
    CHECK(loc.remote_db().size() == 2);
    // Every edge this instance can produce has a local endpoint; with no
    // local keyframes there is none.
    CHECK(loc.stats().edges == 0);
}

TEST_CASE("gross-error pose with plenty of inliers fails g_check and is dropped") {
    FixedExtractor ext;
    Rot3 roll{Eigen::AngleAxisd(0.5, Eigen::Vector3d::UnitX()).toRotationMatrix()};
    ext.result = PoseExtraction{100, Pose6{roll, Eigen::Vector3d(0.3, 0, 0)}};

    LoopThresholds th;
    th.tau_rot = 5.0 * kPi / 180.0;
    MapLocalizer loc(0, th, &ext, Eigen::Vector4d::Ones());
    Eigen::VectorXd d = basis_desc(8, 0);
    auto kf0 = make_kf(0, 0.0, d);
    loc.process_keyframe(kf0);
    auto edge = loc.process_keyframe(make_kf(1, 0.0, d));
    CHECK_FALSE(edge.has_value());
    CHECK(loc.stats().gcheck_rejected == 1);
}

TEST_CASE("edges longer than l_max are dropped") {
    FixedExtractor ext;
    ext.result = PoseExtraction{100, Pose6{Rot3::identity(), Eigen::Vector3d(-20, 0, 0)}};
    LoopThresholds th;
    th.l_max = 10.0;
    MapLocalizer loc(0, th, &ext, Eigen::Vector4d::Ones());
    Eigen::VectorXd d = basis_desc(8, 0);
    loc.process_keyframe(make_kf(0, 0.0, d));
    auto edge = loc.process_keyframe(make_kf(1, 0.0, d));
    CHECK_FALSE(edge.has_value());
    CHECK(loc.stats().length_rejected == 1);
}

TEST_CASE("low inlier counts are gated") {
    FixedExtractor ext;
    ext.result = PoseExtraction{3, Pose6{}};
    MapLocalizer loc(0, LoopThresholds{}, &ext, Eigen::Vector4d::Ones());
    Eigen::VectorXd d = basis_desc(8, 0);
    loc.process_keyframe(make_kf(0, 0.0, d));
    CHECK_FALSE(loc.process_keyframe(make_kf(1, 0.0, d)).has_value());
    CHECK(loc.stats().inlier_rejected == 1);
}

TEST_CASE("database dump/load round-trips") {
    auto sc = static_pair_scenario(0.5);
    auto streams = sim::generate_streams(sc);
    sim::SimFrontEnd fe(sc, streams);
    KeyframeDatabase db;
    db.add(fe.make_keyframe(0, 0.0));
    db.add(fe.make_keyframe(1, 1.0));

    std::ostringstream os;
    db.dump(os);
    std::istringstream is(os.str());
    auto back = KeyframeDatabase::load(is);
    REQUIRE(back.size() == db.size());
    for (size_t i = 0; i < db.size(); ++i) {
        const auto& a = db.keyframes()[i];
        const auto& b = back.keyframes()[i];
        CHECK(a.drone == b.drone);
        CHECK(a.t == b.t);
        CHECK((a.vio4.position() - b.vio4.position()).norm() < 1e-15);
        CHECK((a.descriptors[0] - b.descriptors[0]).norm() < 1e-15);
        // Exact-descriptor query at distance 0 retrieves the same keyframe.
        auto m = back.knn(a.descriptors[0], 1);
        REQUIRE(m.size() == 1);
        CHECK(m[0].distance < 1e-15);
        CHECK(back.keyframe(m[0].kf_index).drone == a.drone);
    }
}
