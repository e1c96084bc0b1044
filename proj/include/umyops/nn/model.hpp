#ifndef UMYOPS_NN_MODEL_HPP
#define UMYOPS_NN_MODEL_HPP

#include <map>
#include <set>

#include "json.hpp"

#include "umyops/core/rng.hpp"
#include "umyops/data/labels.hpp"
#include "umyops/nn/ops.hpp"

namespace umyops::nn {

struct NetConfig {
    int levels = 4;
    std::vector<int> channels = {16, 32, 64, 128};
    int image_size = 64;          // training raster (square)
    int grid_m = 4;
    double canonical_extent = 256.0;
    int convs_per_level = 2;
    // fixed scale on the head output so weights stay O(1) while predicted
    // displacements span tens of canonical pixels
    double head_output_gain = 32.0;
    uint64_t init_seed = 1234;

    void validate() const;
    nlohmann::json to_json() const;
    static NetConfig from_json(const nlohmann::json& j);
};

// Named parameter arrays with deterministic per-name initialization, freeze
// flags, and a binary on-disk format that round-trips byte-exactly.
class ParamStore {
public:
    explicit ParamStore(uint64_t seed) : seed_(seed) {}

    Var conv_weight(const std::string& name, int cout, int cin, int k);
    Var vector_bias(const std::string& name, int n);
    Var fc_weight(const std::string& name, int mout, int nin, bool zero_init);

    const std::map<std::string, Var>& all() const { return params_; }
    void freeze_prefix(const std::string& prefix);
    bool any_frozen() const;
    std::vector<Var> trainable() const;
    void zero_grads();

    void save(const std::string& path) const;
    void load(const std::string& path);
    uint64_t digest() const;             // FNV-1a over all values, name order
    uint64_t digest_prefix(const std::string& prefix) const;

private:
    Var get_or_create(const std::string& name, int c, int h, int w,
                      const std::function<void(Tensor&, Rng&)>& init);
    uint64_t seed_;
    std::map<std::string, Var> params_;
};

struct EncoderFeatures {
    std::vector<Var> level;   // one per pyramid level, finest first
};

// Aligned-set inference products in the CRI frame.
struct ForwardOutputs {
    std::map<std::string, tps::DisplacementSet> disp;   // canonical frame
    std::map<std::string, ImageD> myo_prob;
    Tensor pathology_logits;                            // (3,S,S): BG/EDEMA/SCAR
    std::map<std::string, ImageD> warped_images;        // I', CRI included as-is
};

inline constexpr int kPathologyClasses = 3;            // BG, EDEMA, SCAR
inline constexpr int kClassBg = 0, kClassEdema = 1, kClassScar = 2;

// The U-MyoPS network: three sequence encoders and two registration heads,
// three anatomy decoders (the CRI one fused through MSF), and the prior-aware
// pathology subnetwork gated by SPG.
class UMyoPSNet {
public:
    explicit UMyoPSNet(NetConfig cfg);

    EncoderFeatures encode(const std::string& enc_name, const Var& image, int in_channels);

    // Displacements of the m x m control grid in the canonical frame,
    // predicted from pooled deepest features of the source and CRI encoders.
    // The output layer is zero-initialized so training starts at identity.
    Var reg_head(const std::string& head_name, const EncoderFeatures& src,
                 const EncoderFeatures& cri);

    // Misalignment-compensated fusion: warp the bSSFP/T2 feature maps with
    // displacements rescaled to the feature raster, then concatenate with the
    // CRI features and the decoder stream. delta_* are in a frame of extent
    // delta_frame pixels.
    Var msf_fuse(const Var& f_in, const Var& f_bssfp, const Var& f_t2, const Var& f_lge,
                 const Var& delta_bssfp, const Var& delta_t2, double delta_frame);

    // Spatial prior gate: A = sigmoid((F_in + F_mp) * scale(prior)), output
    // concat(F_mp * A, F_in).
    Var spg_gate(const Var& f_in, const Var& f_mp, const Var& myo_prob);

    Var decode_myo_plain(const std::string& dec_name, const EncoderFeatures& own);
    Var decode_myo_msf(const EncoderFeatures& lge, const EncoderFeatures& bssfp,
                       const EncoderFeatures& t2, const Var& delta_bssfp, const Var& delta_t2);

    // aligned3: channel-stacked I' (bSSFP', LGE, T2'); prior: (1,S,S).
    Var pathology_logits(const Var& aligned3, const Var& myo_prior);

    // Warp a tensor by canonical-frame displacements at its own raster.
    Var warp_by_delta(const Var& x, const Var& delta_canonical);

    const tps::WarpBasis& basis_for(int size);
    int delta_dim() const { return 2 * cfg.grid_m * cfg.grid_m; }

    NetConfig cfg;
    ParamStore params;

private:
    Var conv_block(const std::string& name, Var x, int cin, int cout);
    std::map<int, tps::WarpBasis> basis_;
};

// Checkpoint directory: config.json + params.bin + manifest.json.
void save_checkpoint(const std::string& dir, const UMyoPSNet& net, const nlohmann::json& manifest);
std::unique_ptr<UMyoPSNet> load_checkpoint(const std::string& dir);

} // namespace umyops::nn

#endif
