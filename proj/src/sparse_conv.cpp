#include "seg4d/sparse_conv.hpp"

namespace seg4d {

KernelMap build_kernel_map(const VoxelGrid& grid) {
    KernelMap map;
    map.cells = grid.size();
    for (std::size_t tap = 0; tap < kKernelVolume; ++tap) {
        const auto off = kernel_offset(tap);
        auto& pairs = map.pairs[tap];
        for (std::size_t cell = 0; cell < grid.size(); ++cell) {
            const VoxelKey& k = grid.keys[cell];
            const VoxelKey nb{k[0] + off[0], k[1] + off[1], k[2] + off[2]};
            if (auto src = grid.find(nb)) {
                pairs.emplace_back(static_cast<std::uint32_t>(*src), static_cast<std::uint32_t>(cell));
            }
        }
    }
    return map;
}

}  // namespace seg4d
