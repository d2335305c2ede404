#pragma once

#include <array>
#include <string>
#include <vector>

namespace stvig {

inline constexpr int kJointCount = 15;
inline constexpr int kPartitionCount = 5;
inline constexpr int kJointsPerPartition = 3;

/// The 15-joint template arranged partition-major: head, right arm,
/// right leg, left arm, left leg, three joints each. Index order inside a
/// partition follows the anatomical listing (e.g. wrist, elbow, shoulder),
/// which makes partition borders anatomically adjacent in the 1-D sequence.
struct PartitionSpec {
    std::array<std::string, kJointCount> joints;
    std::array<std::array<int, kJointsPerPartition>, kPartitionCount> partitions;
    std::array<std::string, kPartitionCount> partition_names;

    int partition_of(int joint) const;
};

PartitionSpec build_partition_spec();

/// All joints outside i's partition (12 of them), ascending.
std::vector<int> inter_neighbors(const PartitionSpec& spec, int i);

/// The two other joints of i's partition, ascending.
std::vector<int> intra_neighbors(const PartitionSpec& spec, int i);

/// Neighbor tables plus the window sizes used by the temporal convolution.
struct PartitionGraph {
    PartitionSpec spec;
    std::vector<std::vector<int>> inter;  // 12 neighbors per node
    std::vector<std::vector<int>> intra;  // 2 neighbors per node
    int ks = 3;
    int kt = 3;
};

PartitionGraph build_partition_graph(int ks = 3, int kt = 3);

/// The K_S x K_T aggregation window around joint i in the 1-D order:
/// in-range spatial indices (ends are zero-padded, i.e. simply absent here)
/// and signed temporal offsets. ks and kt must be odd.
struct TemporalWindow {
    std::vector<int> spatial_indices;
    std::vector<int> temporal_offsets;
};

TemporalWindow temporal_window(int i, int ks, int kt);

/// Joint index map for a reordering of the five partition blocks.
/// result[new_position] = old_joint_index; the order of joints inside each
/// partition is preserved.
std::vector<int> shuffle_partitions(const std::array<int, kPartitionCount>& permutation);

/// The rotate-by-one-block schedule applied before temporal modeling when
/// dynamic partitions are enabled.
std::vector<int> rotation_shuffle();

std::vector<int> inverse_permutation(const std::vector<int>& perm);

}  // namespace stvig
