#include "stvig/skeleton.hpp"

#include <algorithm>
#include <stdexcept>

namespace stvig {

namespace {

void check_joint_index(int i) {
    if (i < 0 || i >= kJointCount)
        throw std::out_of_range("joint index " + std::to_string(i) + " outside [0, 15)");
}

}  // namespace

int PartitionSpec::partition_of(int joint) const {
    check_joint_index(joint);
    return joint / kJointsPerPartition;
}

PartitionSpec build_partition_spec() {
    PartitionSpec spec;
    spec.joints = {"nose",    "l_eye",   "r_eye",
                   "r_wrist", "r_elbow", "r_shoulder",
                   "r_hip",   "r_knee",  "r_ankle",
                   "l_wrist", "l_elbow", "l_shoulder",
                   "l_hip",   "l_knee",  "l_ankle"};
    spec.partition_names = {"head", "right_arm", "right_leg", "left_arm", "left_leg"};
    for (int p = 0; p < kPartitionCount; ++p)
        for (int k = 0; k < kJointsPerPartition; ++k)
            spec.partitions[p][k] = p * kJointsPerPartition + k;
    return spec;
}

std::vector<int> inter_neighbors(const PartitionSpec& spec, int i) {
    check_joint_index(i);
    const int p = spec.partition_of(i);
    std::vector<int> out;
    out.reserve(kJointCount - kJointsPerPartition);
    for (int j = 0; j < kJointCount; ++j)
        if (j / kJointsPerPartition != p) out.push_back(j);
    return out;
}

std::vector<int> intra_neighbors(const PartitionSpec& spec, int i) {
    check_joint_index(i);
    const int p = spec.partition_of(i);
    std::vector<int> out;
    out.reserve(kJointsPerPartition - 1);
    for (int k = 0; k < kJointsPerPartition; ++k) {
        const int j = p * kJointsPerPartition + k;
        if (j != i) out.push_back(j);
    }
    return out;
}

PartitionGraph build_partition_graph(int ks, int kt) {
    PartitionGraph g;
    g.spec = build_partition_spec();
    g.ks = ks;
    g.kt = kt;
    g.inter.reserve(kJointCount);
    g.intra.reserve(kJointCount);
    for (int i = 0; i < kJointCount; ++i) {
        g.inter.push_back(inter_neighbors(g.spec, i));
        g.intra.push_back(intra_neighbors(g.spec, i));
    }
    return g;
}

TemporalWindow temporal_window(int i, int ks, int kt) {
    check_joint_index(i);
    if (ks % 2 == 0 || kt % 2 == 0 || ks < 1 || kt < 1)
        throw std::invalid_argument("temporal_window: ks and kt must be odd and positive");
    TemporalWindow w;
    const int hs = ks / 2;
    for (int j = i - hs; j <= i + hs; ++j)
        if (j >= 0 && j < kJointCount) w.spatial_indices.push_back(j);
    const int ht = kt / 2;
    for (int d = -ht; d <= ht; ++d) w.temporal_offsets.push_back(d);
    return w;
}

std::vector<int> shuffle_partitions(const std::array<int, kPartitionCount>& permutation) {
    std::array<bool, kPartitionCount> used{};
    for (int p : permutation) {
        if (p < 0 || p >= kPartitionCount || used[p])
            throw std::invalid_argument("shuffle_partitions: input is not a permutation of {0..4}");
        used[p] = true;
    }
    std::vector<int> map(kJointCount);
    for (int pos = 0; pos < kPartitionCount; ++pos)
        for (int k = 0; k < kJointsPerPartition; ++k)
            map[pos * kJointsPerPartition + k] = permutation[pos] * kJointsPerPartition + k;
    return map;
}

std::vector<int> rotation_shuffle() {
    // block at position p comes from block p+1 (mod 5)
    return shuffle_partitions({1, 2, 3, 4, 0});
}

std::vector<int> inverse_permutation(const std::vector<int>& perm) {
    std::vector<int> inv(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<int>(i);
    return inv;
}

}  // namespace stvig
