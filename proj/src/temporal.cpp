#include "seg4d/temporal.hpp"

namespace seg4d {

TemporalGraph build_temporal_graph(std::span<const Vec3> current, std::span<const Vec3> previous, std::size_t k) {
    if (k < 1) throw InvalidInput("temporal graph: k must be at least 1");
    if (previous.empty()) {
        throw StructuralError("temporal graph: previous frame is empty; use the current frame as its own previous");
    }
    KnnIndex index(previous);
    const NeighborSet nn = index.query(current, k, 1.0);

    TemporalGraph g;
    g.k = k;
    g.num_points = current.size();
    g.count = nn.count;
    g.index = nn.index;
    g.sq_distance = nn.distance;
    g.offset.assign(nn.index.size(), Vec3::Zero());
    g.relpos.assign(nn.index.size(), Vec3::Ones());
    for (std::size_t i = 0; i < current.size(); ++i) {
        for (std::size_t j = 0; j < g.count[i]; ++j) {
            const std::size_t s = g.slot(i, j);
            const Vec3 diff = previous[g.index[s]] - current[i];
            for (int a = 0; a < 3; ++a) {
                g.offset[s][a] = std::tanh(diff[a]);
                g.relpos[s][a] = relative_position_weight(diff[a]);
            }
        }
    }
    return g;
}

}  // namespace seg4d
