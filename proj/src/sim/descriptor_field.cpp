#include "swarm/sim/descriptor_field.hpp"

#include <cmath>

namespace swarm::sim {

namespace {
// Uniform in [-1, 1] from a hashed key.
double hash_noise(uint64_t key) {
    return 2.0 * (static_cast<double>(hash_mix(key) >> 11) * 0x1.0p-53) - 1.0;
}

uint64_t node_key(uint64_t seed, int64_t ix, int64_t iy, int64_t iz, int stream) {
    uint64_t k = hash_combine(seed, static_cast<uint64_t>(stream) + 0x51ed2701ull);
    k = hash_combine(k, static_cast<uint64_t>(ix + (1ll << 40)));
    k = hash_combine(k, static_cast<uint64_t>(iy + (1ll << 40)));
    k = hash_combine(k, static_cast<uint64_t>(iz + (1ll << 40)));
    return k;
}
}  // namespace

DescriptorField::DescriptorField(uint64_t seed, int dim, double cell_m, double kernel_m)
    : seed_(seed), dim_(dim), cell_(cell_m), kernel_(kernel_m) {
    support_ = static_cast<int>(std::ceil(2.0 * kernel_ / cell_));
}

Eigen::VectorXd DescriptorField::embed(const Eigen::Vector3d& pos, int cam_stream) const {
    const double cutoff2 = 4.0 * kernel_ * kernel_;
    const int64_t cx = static_cast<int64_t>(std::floor(pos.x() / cell_));
    const int64_t cy = static_cast<int64_t>(std::floor(pos.y() / cell_));
    const int64_t cz = static_cast<int64_t>(std::floor(pos.z() / cell_));

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(dim_);
    for (int64_t ix = cx - support_; ix <= cx + support_ + 1; ++ix) {
        for (int64_t iy = cy - support_; iy <= cy + support_ + 1; ++iy) {
            for (int64_t iz = cz - support_; iz <= cz + support_ + 1; ++iz) {
                Eigen::Vector3d node(ix * cell_, iy * cell_, iz * cell_);
                double d2 = (pos - node).squaredNorm();
                if (d2 > cutoff2) continue;
                double w = std::exp(-d2 / (2.0 * kernel_ * kernel_));
                uint64_t key = node_key(seed_, ix, iy, iz, cam_stream);
                for (int c = 0; c < dim_; ++c) {
                    acc(c) += w * hash_noise(hash_combine(key, static_cast<uint64_t>(c)));
                }
            }
        }
    }
    double n = acc.norm();
    if (n < 1e-12) acc(0) = 1.0;  // empty field is unreachable with kernel >= cell
    else acc /= n;
    return acc;
}

}  // namespace swarm::sim
