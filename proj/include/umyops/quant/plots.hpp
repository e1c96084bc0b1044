#ifndef UMYOPS_QUANT_PLOTS_HPP
#define UMYOPS_QUANT_PLOTS_HPP

#include <string>
#include <vector>

#include "umyops/quant/clinquant.hpp"

namespace umyops::quant {

// Bull's-eye view of one slice: 100 sector arcs colored by viability bin
// (mistyrose, coral, orangered, red).
void write_bullseye_svg(const std::string& path, const ChordSet& chords,
                        const std::string& title);

// Scatter with least-squares line and the correlation annotated.
void write_scatter_svg(const std::string& path, const std::vector<double>& x,
                       const std::vector<double>& y, const std::string& x_label,
                       const std::string& y_label, const std::string& title);

} // namespace umyops::quant

#endif
