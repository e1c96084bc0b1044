#ifndef UMYOPS_DATA_CONTAINER_HPP
#define UMYOPS_DATA_CONTAINER_HPP

#include <string>
#include <vector>

#include "json.hpp"

#include "umyops/data/phantom.hpp"
#include "umyops/data/slices.hpp"

namespace umyops::data {

// Portable on-disk form of a MultiSeqSlice: little-endian raw arrays
// (float32 images, uint8 labels) plus a slice.json sidecar that carries
// shape, spacing, CRI and file names.
void write_slice(const std::string& dir, const MultiSeqSlice& slice);
MultiSeqSlice read_slice(const std::string& dir);

nlohmann::json displacement_to_json(const tps::DisplacementSet& d);
tps::DisplacementSet displacement_from_json(const nlohmann::json& j);

// Dataset directory: numbered sample subdirectories plus manifest.json with
// seeds and ground-truth displacements.
struct DatasetEntry {
    std::string dir;                                       // relative sample dir
    std::map<std::string, tps::DisplacementSet> gt_disp;   // may be empty
    uint64_t seed = 0;
};

void write_dataset(const std::string& dir, const std::vector<PhantomSample>& samples,
                   const std::vector<uint64_t>& seeds, const nlohmann::json& extra);

struct Dataset {
    std::string root;
    std::vector<DatasetEntry> entries;
    nlohmann::json manifest;

    MultiSeqSlice load(size_t i) const;
};

Dataset read_dataset(const std::string& dir);

// Raw helpers shared with the checkpoint code.
void write_floats(const std::string& path, const std::vector<float>& v);
std::vector<float> read_floats(const std::string& path, size_t expect);
void write_bytes(const std::string& path, const std::vector<uint8_t>& v);
std::vector<uint8_t> read_bytes(const std::string& path, size_t expect);

} // namespace umyops::data

#endif
