#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "swarm/geometry.hpp"
#include "test_util.hpp"

using namespace swarm;
namespace tu = swarm::testutil;

TEST_CASE("wrap_angle maps into (-pi, pi]") {
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
    CHECK(wrap_angle(3.0 * kPi / 2.0) == doctest::Approx(-kPi / 2.0));
    CHECK(wrap_angle(-3.0 * kPi) == doctest::Approx(kPi));
    auto rng = tu::make_rng(1);
    for (int i = 0; i < 1000; ++i) {
        double w = wrap_angle(tu::uniform(rng, -50, 50));
        CHECK(w > -kPi);
        CHECK(w <= kPi);
    }
}

TEST_CASE("rotz basics") {
    CHECK((rotz(0.0).m - Eigen::Matrix3d::Identity()).norm() == doctest::Approx(0.0));
    Eigen::Vector3d v = rotz(kPi / 2.0) * Eigen::Vector3d(1, 0, 0);
    CHECK(v.x() == doctest::Approx(0.0));
    CHECK(v.y() == doctest::Approx(1.0));
    CHECK(v.z() == doctest::Approx(0.0));
}

TEST_CASE("yaw_of inverts rotz with wrapping") {
    CHECK(yaw_of(Rot3::identity()) == 0.0);
    CHECK(yaw_of(rotz(1.2)) == doctest::Approx(1.2));
    CHECK(yaw_of(rotz(3.0 * kPi / 2.0)) == doctest::Approx(-kPi / 2.0));
    auto rng = tu::make_rng(2);
    for (int i = 0; i < 100; ++i) {
        double th = tu::uniform(rng, -20, 20);
        CHECK(yaw_of(rotz(th)) == doctest::Approx(wrap_angle(th)).epsilon(1e-12));
    }
}

TEST_CASE("yaw_of flags gimbal-degenerate rotations") {
    // Rotation mapping the x-axis onto +z.
    Eigen::Matrix3d m;
    m = Eigen::AngleAxisd(-kPi / 2.0, Eigen::Vector3d::UnitY()).toRotationMatrix();
    bool degenerate = false;
    double y = yaw_of(Rot3{m}, &degenerate);
    CHECK(degenerate);
    CHECK(y == 0.0);
    // A generic rotation must not be flagged.
    yaw_of(rotz(0.7), &degenerate);
    CHECK_FALSE(degenerate);
}

TEST_CASE("compose4 examples") {
    Pose4 p{2, -1, 0.5, 0.3};
    Pose4 c = compose4(Pose4::identity(), p);
    CHECK(c.x == doctest::Approx(p.x));
    CHECK(c.yaw == doctest::Approx(p.yaw));

    Pose4 a{1, 0, 0, 0};
    Pose4 b{0, 1, 0, kPi / 2.0};
    Pose4 ab = compose4(a, b);
    CHECK(ab.x == doctest::Approx(1.0));
    CHECK(ab.y == doctest::Approx(1.0));
    CHECK(ab.z == doctest::Approx(0.0));
    CHECK(ab.yaw == doctest::Approx(kPi / 2.0));
}

TEST_CASE("group laws on random poses") {
    auto rng = tu::make_rng(3);
    for (int i = 0; i < 100; ++i) {
        Pose4 p = tu::random_pose4(rng);
        Pose4 id = compose4(inverse4(p), p);
        CHECK(id.position().norm() < 1e-12);
        CHECK(std::abs(wrap_angle(id.yaw)) < 1e-12);

        Pose4 a = tu::random_pose4(rng), b = tu::random_pose4(rng), c = tu::random_pose4(rng);
        Pose4 l = compose4(compose4(a, b), c);
        Pose4 r = compose4(a, compose4(b, c));
        CHECK((l.position() - r.position()).norm() < 1e-12);
        CHECK(std::abs(wrap_angle(l.yaw - r.yaw)) < 1e-12);

        // Against the homogeneous-matrix oracle.
        Eigen::Matrix4d h = tu::homogeneous(a) * tu::homogeneous(b);
        Pose4 oracle = tu::from_homogeneous(h);
        Pose4 mine = compose4(a, b);
        CHECK((mine.position() - oracle.position()).norm() < 1e-10);
        CHECK(std::abs(wrap_angle(mine.yaw - oracle.yaw)) < 1e-10);
    }
}

TEST_CASE("relative4 is the left-inverse composition") {
    auto rng = tu::make_rng(4);
    for (int i = 0; i < 100; ++i) {
        Pose4 a = tu::random_pose4(rng), b = tu::random_pose4(rng);
        Pose4 rel = relative4(a, b);
        Pose4 back = compose4(a, rel);
        CHECK((back.position() - b.position()).norm() < 1e-12);
        CHECK(std::abs(wrap_angle(back.yaw - b.yaw)) < 1e-12);
    }
}

TEST_CASE("pose6 algebra round-trips") {
    auto rng = tu::make_rng(5);
    for (int i = 0; i < 100; ++i) {
        Pose6 a{tu::random_rot3(rng), Eigen::Vector3d::Random() * 5.0};
        Pose6 b{tu::random_rot3(rng), Eigen::Vector3d::Random() * 5.0};
        Pose6 id = compose6(inverse6(a), a);
        CHECK(id.translation.norm() < 1e-12);
        CHECK((id.rotation.m - Eigen::Matrix3d::Identity()).norm() < 1e-12);
        Pose6 back = compose6(a, relative6(a, b));
        CHECK((back.translation - b.translation).norm() < 1e-12);
        CHECK((back.rotation.m - b.rotation.m).norm() < 1e-12);
    }
}

TEST_CASE("lift_to_6dof zero correction and direct substitution") {
    auto rng = tu::make_rng(6);
    Pose6 vio6{tu::random_rot3(rng), Eigen::Vector3d(0.4, -0.2, 1.0)};
    Pose4 vio4 = project_to_4dof(vio6);

    Pose4 p4{3, 2, 1, vio4.yaw};
    Pose6 out = lift_to_6dof(p4, vio6, vio4);
    CHECK((out.rotation.m - vio6.rotation.m).norm() < 1e-12);
    CHECK((out.translation - p4.position()).norm() == 0.0);

    Pose6 ident;
    Pose4 q{1, 2, 3, kPi / 2.0};
    Pose6 lifted = lift_to_6dof(q, ident, project_to_4dof(ident));
    CHECK((lifted.rotation.m - rotz(kPi / 2.0).m).norm() < 1e-12);
    CHECK(lifted.translation == Eigen::Vector3d(1, 2, 3));
}

TEST_CASE("lift_to_6dof restores the target yaw and keeps the tilt") {
    auto rng = tu::make_rng(7);
    for (int i = 0; i < 100; ++i) {
        Rot3 r = tu::random_rot3(rng);
        bool degenerate = false;
        yaw_of(r, &degenerate);
        if (degenerate) continue;
        Pose6 vio6{r, Eigen::Vector3d::Random() * 3.0};
        Pose4 vio4 = project_to_4dof(vio6);
        Pose4 p4 = tu::random_pose4(rng);
        Pose6 out = lift_to_6dof(p4, vio6, vio4);
        CHECK(yaw_of(out.rotation) == doctest::Approx(wrap_angle(p4.yaw)).epsilon(1e-9));
        // Tilt of the body z-axis against world z is untouched by a yaw fix.
        double tilt_in = std::acos(std::clamp(vio6.rotation.m(2, 2), -1.0, 1.0));
        double tilt_out = std::acos(std::clamp(out.rotation.m(2, 2), -1.0, 1.0));
        CHECK(tilt_out == doctest::Approx(tilt_in).epsilon(1e-12));
    }
}
