#pragma once

#include <random>
#include <string>
#include <vector>

#include "seg4d/geometry.hpp"
#include "seg4d/mlp.hpp"
#include "seg4d/sparse_conv.hpp"
#include "seg4d/temporal.hpp"
#include "seg4d/voxel_grid.hpp"

namespace seg4d {

struct BackboneConfig {
    std::size_t point_features = 1;  // per-point input channels (remission)
    std::size_t encoder_width = 16;
    std::size_t decoder_width = 16;  // width of f, the features handed to the refiner
    std::size_t num_classes = 3;
    double height_scale = 2.0;       // cell-centre z (m) / height_scale is appended to the voxel input
    TviConfig tvi;
};

// Small two-branch sparse-voxel network. Both branches share the encoder and
// the sparse convolution:
//   encoder -> sparse conv -> CFGA(current, previous) -> TVI -> [h, f_cur]
//   -> decoder (features f) -> classifier (logits l)
template <typename T>
struct BackboneParams {
    BackboneConfig config;
    Mlp<T> encoder;
    SparseConv<T> conv;
    Mlp<T> cfga;
    Mlp<T> tvi;
    Mlp<T> decoder;
    Mlp<T> classifier;

    template <typename Rng>
    static BackboneParams make(const BackboneConfig& cfg, Rng& rng) {
        const std::size_t e = cfg.encoder_width, f = cfg.decoder_width;
        BackboneParams p;
        p.config = cfg;
        p.encoder = Mlp<T>("backbone.encoder", {cfg.point_features + 1, e}, {Activation::Relu});
        p.conv = SparseConv<T>("backbone.conv", e, e, Activation::Relu);
        p.cfga = Mlp<T>("cfga.mlp", {e, e, e}, {Activation::Relu, Activation::Identity});
        p.tvi = Mlp<T>("tvi.mlp", {2 * e, e, e}, {Activation::Relu, Activation::Relu});
        p.decoder = Mlp<T>("backbone.decoder", {2 * e, f}, {Activation::Relu});
        p.classifier = Mlp<T>("backbone.classifier", {f, cfg.num_classes}, {Activation::Identity});
        p.encoder.init(rng);
        p.conv.init(rng);
        p.cfga.init(rng);
        p.tvi.init(rng);
        p.decoder.init(rng);
        p.classifier.init(rng);
        return p;
    }

    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> all;
        auto add = [&](auto&& v) { all.insert(all.end(), v.begin(), v.end()); };
        add(encoder.parameters());
        add(conv.parameters());
        add(cfga.parameters());
        add(tvi.parameters());
        add(decoder.parameters());
        add(classifier.parameters());
        return all;
    }
    std::vector<const Parameter<T>*> parameters() const {
        std::vector<const Parameter<T>*> all;
        auto add = [&](auto&& v) { all.insert(all.end(), v.begin(), v.end()); };
        add(encoder.parameters());
        add(conv.parameters());
        add(cfga.parameters());
        add(tvi.parameters());
        add(decoder.parameters());
        add(classifier.parameters());
        return all;
    }
    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* p : parameters()) n += p->value.size();
        return n;
    }
    void zero_grad() {
        for (auto* p : parameters()) p->zero_grad();
    }

    template <typename U>
    BackboneParams<U> cast() const {
        BackboneParams<U> o;
        o.config = config;
        o.encoder = encoder.template cast<U>();
        o.conv = conv.template cast<U>();
        o.cfga = cfga.template cast<U>();
        o.tvi = tvi.template cast<U>();
        o.decoder = decoder.template cast<U>();
        o.classifier = classifier.template cast<U>();
        return o;
    }
};

// Geometry derived from a (current, previous) grid pair: kernel maps for the
// sparse convolution on each grid, and TVI neighbours with weights computed
// on integer cell coordinates.
struct PairGeometry {
    KernelMap current_map;
    KernelMap previous_map;
    NeighborSet neighbors;
};

PairGeometry make_pair_geometry(const VoxelGrid& current, const VoxelGrid& previous, const TviConfig& tvi);

// Encoder input: mean point features plus normalised cell height.
template <typename T>
Matrix<T> voxel_input(const VoxelGrid& grid, const BackboneConfig& cfg) {
    if (grid.features.cols() != cfg.point_features) {
        throw StructuralError("backbone: grid carries " + std::to_string(grid.features.cols()) +
                              " feature channels, expected " + std::to_string(cfg.point_features));
    }
    Matrix<T> x(grid.size(), cfg.point_features + 1);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (std::size_t c = 0; c < cfg.point_features; ++c) x(i, c) = static_cast<T>(grid.features(i, c));
        x(i, cfg.point_features) = static_cast<T>(grid.cell_center(i).z() / cfg.height_scale);
    }
    return x;
}

template <typename T>
struct BackboneOutput {
    Matrix<T> logits;    // per current voxel
    Matrix<T> features;  // per current voxel, decoder output
};

template <typename T>
struct BackboneCache {
    MlpCache<T> enc_cur, enc_prev;
    SparseConvCache<T> conv_cur, conv_prev;
    CfgaCache<T> cfga;
    TviCache<T> tvi;
    MlpCache<T> decoder;
    MlpCache<T> classifier;
    std::size_t width = 0;
};

template <typename T>
BackboneOutput<T> backbone_forward(const BackboneParams<T>& p, const VoxelGrid& current, const VoxelGrid& previous,
                                   const PairGeometry& geom, std::type_identity_t<BackboneCache<T>>* cache = nullptr) {
    if (current.unit != previous.unit) {
        throw StructuralError("backbone: voxel units differ (" + std::to_string(current.unit) + " vs " +
                              std::to_string(previous.unit) + ")");
    }
    BackboneCache<T> local;
    BackboneCache<T>& c = cache ? *cache : local;
    c.width = p.config.encoder_width;

    const Matrix<T> enc_cur = mlp_forward(p.encoder, voxel_input<T>(current, p.config), &c.enc_cur);
    const Matrix<T> enc_prev = mlp_forward(p.encoder, voxel_input<T>(previous, p.config), &c.enc_prev);
    const Matrix<T> conv_cur = sparse_conv_forward(p.conv, geom.current_map, enc_cur, &c.conv_cur);
    const Matrix<T> conv_prev = sparse_conv_forward(p.conv, geom.previous_map, enc_prev, &c.conv_prev);
    const Matrix<T> att = cfga_forward(conv_cur, conv_prev, p.cfga, &c.cfga);
    const Matrix<T> h = tvi_forward(geom.neighbors, conv_prev, att, p.tvi, &c.tvi);
    BackboneOutput<T> out;
    out.features = mlp_forward(p.decoder, hconcat(h, att), &c.decoder);
    out.logits = mlp_forward(p.classifier, out.features, &c.classifier);
    return out;
}

// Accumulates parameter gradients. `d_features` (optional, may be empty) adds
// an extra gradient on the decoder features, as produced by the refiner.
template <typename T>
void backbone_backward(BackboneParams<T>& p, const BackboneCache<T>& c, const Matrix<T>& d_logits,
                       const Matrix<T>& d_features = {}) {
    Matrix<T> d_f = mlp_backward(p.classifier, c.classifier, d_logits);
    if (!d_features.empty()) add_inplace(d_f, d_features);
    const Matrix<T> d_dec = mlp_backward(p.decoder, c.decoder, d_f);
    Matrix<T> d_h, d_att;
    hsplit(d_dec, c.width, d_h, d_att);
    const TviGrads<T> tg = tvi_backward(p.tvi, c.tvi, d_h);
    add_inplace(d_att, tg.d_current);
    const CfgaGrads<T> cg = cfga_backward(p.cfga, c.cfga, d_att);
    Matrix<T> d_conv_prev = tg.d_previous;
    add_inplace(d_conv_prev, cg.d_previous);
    const Matrix<T> d_enc_cur = sparse_conv_backward(p.conv, c.conv_cur, cg.d_current);
    const Matrix<T> d_enc_prev = sparse_conv_backward(p.conv, c.conv_prev, d_conv_prev);
    mlp_backward(p.encoder, c.enc_cur, d_enc_cur, false);
    mlp_backward(p.encoder, c.enc_prev, d_enc_prev, false);
}

}  // namespace seg4d
