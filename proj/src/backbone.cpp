#include "seg4d/backbone.hpp"

namespace seg4d {

PairGeometry make_pair_geometry(const VoxelGrid& current, const VoxelGrid& previous, const TviConfig& tvi) {
    PairGeometry g;
    g.current_map = build_kernel_map(current);
    g.previous_map = build_kernel_map(previous);
    const auto cur = current.cell_coords();
    const auto prev = previous.cell_coords();
    g.neighbors = interpolation_weights(knn_previous_grid(cur, prev, tvi.gamma, tvi.k), tvi.alpha, tvi.beta);
    return g;
}

}  // namespace seg4d
