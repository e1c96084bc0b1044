#ifndef UMYOPS_DATA_PHANTOM_HPP
#define UMYOPS_DATA_PHANTOM_HPP

#include <cstdint>
#include <map>

#include "umyops/data/slices.hpp"
#include "umyops/tps/tps.hpp"

namespace umyops::data {

struct PhantomSpec {
    uint64_t seed = 0;
    int size = 128;                    // square raster, px
    double spacing_mm = 1.5;
    double misalign_magnitude = 8.0;   // max control-point displacement, px
    double scar_fraction = 0.15;       // of myocardium area; scar sits inside edema
    double edema_fraction = 0.30;
    double noise_sigma = 0.03;
    // T2 blood-pool brightness; raising it towards the edema intensity makes
    // pathology indistinguishable from blood in every sequence, so only the
    // wall location disambiguates (stress case for the spatial prior).
    double t2_blood_intensity = 0.55;
    // heart placement variability: centre jitter as a fraction of the raster
    // and the sampling range of the outer wall radius
    double center_jitter_frac = 0.025;
    double r_out_min = 0.285, r_out_max = 0.345;
    // Healthy-myocardium brightness override for every sequence (negative
    // keeps the per-sequence defaults). Values close to the blood intensity
    // leave the wall with little contrast of its own, so downstream
    // consumers must rely on the extracted prior rather than re-deriving
    // the anatomy from intensities.
    double myo_intensity = -1.0;

    void validate() const;
};

struct PhantomSample {
    MultiSeqSlice slice;
    // Ground-truth displacements (frame = phantom raster) that realign each
    // non-CRI rendering back onto the CRI scene.
    std::map<std::string, tps::DisplacementSet> gt_disp;
};

// Concentric-annulus heart with wedge pathologies, rendered per sequence:
// bSSFP carries anatomy contrast, LGE highlights scar, T2 highlights edema.
// bSSFP and T2 are drawn misaligned by known smooth TPS warps so that warping
// them with gt_disp reproduces the CRI scene; labels follow the same warps.
PhantomSample generate_phantom(const PhantomSpec& spec);

} // namespace umyops::data

#endif
