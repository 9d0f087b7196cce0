#pragma once

#include <Eigen/Core>

#include <cstdint>

namespace swarm::sim {

/// Deterministic hash mix (splitmix64 finalizer).
inline uint64_t hash_mix(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d4ba49d6caf4f1ull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) { return hash_mix(a ^ hash_mix(b)); }

/// Smooth random embedding of 3D position: kernel-weighted noise on a
/// coarse lattice. Nearby positions map to nearby unit vectors, positions
/// a few meters apart to effectively independent ones, which is the
/// behavior place-recognition descriptors exhibit without a learned model.
class DescriptorField {
public:
    DescriptorField(uint64_t seed, int dim, double cell_m = 0.5, double kernel_m = 0.75);

    /// Unit descriptor of a position for one virtual-camera stream.
    Eigen::VectorXd embed(const Eigen::Vector3d& pos, int cam_stream = 0) const;

    int dim() const { return dim_; }

private:
    uint64_t seed_;
    int dim_;
    double cell_;
    double kernel_;
    int support_;  // lattice radius covered by the kernel
};

}  // namespace swarm::sim
