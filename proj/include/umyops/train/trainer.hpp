#ifndef UMYOPS_TRAIN_TRAINER_HPP
#define UMYOPS_TRAIN_TRAINER_HPP

#include <optional>

#include "umyops/data/container.hpp"
#include "umyops/losses/losses.hpp"
#include "umyops/nn/model.hpp"

namespace umyops::train {

struct TrainConfig {
    int stage = 1;
    double learning_rate = 1e-3;       // stage-2 runs default to 5e-4
    int batch_size = 8;
    int max_steps = 600;
    double lambda_balance = 0.1;
    uint64_t seed = 0;
    std::string checkpoint_dir;
    int convergence_patience = 10;     // evaluations without improvement
    int eval_interval = 25;            // steps between validation passes
    double smooth_eps = 1e-5;

    enum class PriorMode { True, Uniform, Shuffled };
    PriorMode prior_mode = PriorMode::True;   // stage-2 ablation switch
    bool augment_flips = false;               // random H/V flips during stage 1

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// A slice unpacked into training-ready arrays (images Z-scored).
struct TrainSample {
    std::map<std::string, nn::Tensor> images;               // (1,S,S)
    std::map<std::string, nn::Tensor> anatomy_tensor;       // (3,S,S) one-hot
    std::map<std::string, std::array<ImageD, 3>> anatomy;   // MYO/LV/RV one-hot
    std::map<std::string, ImageD> myo;                      // wall incl. pathology
    std::map<std::string, data::LabelMask> labels;
    std::optional<data::LabelMask> gold_pathology;          // merged, common space
    std::array<double, 2> spacing{1.0, 1.0};
    int size = 0;
};

TrainSample prepare_sample(const data::MultiSeqSlice& slice);
std::vector<TrainSample> prepare_dataset(const data::Dataset& ds);

// Consistent horizontal/vertical flip of every array in the sample.
TrainSample flip_sample(const TrainSample& s, bool flip_rows, bool flip_cols);

class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    void step(const std::vector<nn::Var>& params);

private:
    double lr_, b1_, b2_, eps_;
    long t_ = 0;
    std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> state_;
};

struct TrainResult {
    double best_val_loss = 0.0;
    int steps_run = 0;
    bool aborted_nan = false;
    std::string checkpoint_dir;
};

// Stage 1: joint registration + anatomy extraction under the hybrid loss,
// patience-based early stop on the validation hybrid loss.
TrainResult train_stage1(nn::UMyoPSNet& net, const std::vector<TrainSample>& train,
                         const std::vector<TrainSample>& val, const TrainConfig& cfg,
                         const std::string& log_csv);

// Stage 2: freeze everything from stage 1 and optimize the prior-aware
// pathology subnetwork. Throws NumericError if frozen parameters change.
TrainResult train_stage2(nn::UMyoPSNet& net, const std::vector<TrainSample>& train,
                         const std::vector<TrainSample>& val, const TrainConfig& cfg,
                         const std::string& log_csv);

inline const std::vector<std::string>& stage1_prefixes() {
    static const std::vector<std::string> p{"E_bSSFP", "E_LGE", "E_T2", "R_bSSFP",
                                            "R_T2", "D_bSSFP", "D_LGE", "D_T2"};
    return p;
}

// Stage-1 products for one sample, computed once and reused.
struct AlignedProducts {
    nn::Tensor deltas_canonical_bssfp;   // (2n,1,1)
    nn::Tensor deltas_canonical_t2;
    ImageD myo_prob_lge;
    nn::Tensor aligned3;                 // stacked (bSSFP', LGE, T2')
    std::map<std::string, ImageD> warped_images;
};
AlignedProducts run_stage1_products(nn::UMyoPSNet& net, const TrainSample& sample);

// Full inference on one slice: displacements, aligned images, myocardium and
// pathology predictions, and the composed final mask (scar wins).
nn::ForwardOutputs infer_slice(nn::UMyoPSNet& net, const data::MultiSeqSlice& slice);
data::LabelMask compose_final_mask(const nn::ForwardOutputs& out, double myo_threshold = 0.5);

// Common-space pathology gold for real data: LGE scar merged with the T2
// edema warped by the predicted registration. Phantoms carry gold directly.
data::LabelMask resolve_pathology_gold(nn::UMyoPSNet& net, const TrainSample& sample);

// Canonical-frame displacement tensor to the serializable form.
tps::DisplacementSet deltas_to_set(const nn::Tensor& deltas, double frame_extent);

} // namespace umyops::train

#endif
