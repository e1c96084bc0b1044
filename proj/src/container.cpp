#include "umyops/data/container.hpp"

#include <filesystem>
#include <fstream>

#include "umyops/core/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace umyops::data {

namespace {

std::string seq_file_stem(const std::string& seq) {
    std::string s = seq;
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(path + ": " + e.what());
    }
    return j;
}

void save_json(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace

void write_floats(const std::string& path, const std::vector<float>& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

std::vector<float> read_floats(const std::string& path, size_t expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<float> v(expect);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(expect * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != expect * sizeof(float))
        throw IoError(path + ": unexpected size");
    return v;
}

void write_bytes(const std::string& path, const std::vector<uint8_t>& v) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size()));
}

std::vector<uint8_t> read_bytes(const std::string& path, size_t expect) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<uint8_t> v(expect);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(expect));
    if (static_cast<size_t>(in.gcount()) != expect) throw IoError(path + ": unexpected size");
    return v;
}

void write_slice(const std::string& dir, const MultiSeqSlice& slice) {
    if (!slice.consistent()) throw InvalidArgument("write_slice: inconsistent slice");
    fs::create_directories(dir);

    json meta;
    meta["schema"] = "umyops-slice-v1";
    meta["h"] = slice.h;
    meta["w"] = slice.w;
    meta["spacing"] = {slice.spacing[0], slice.spacing[1]};
    meta["cri"] = slice.cri;
    meta["source"] = slice.source;
    meta["slice_index"] = slice.slice_index;

    for (const auto& [id, img] : slice.images) {
        const std::string name = seq_file_stem(id) + ".raw";
        std::vector<float> buf(img.size());
        for (size_t i = 0; i < img.size(); ++i) buf[i] = static_cast<float>(img.raw()[i]);
        write_floats(dir + "/" + name, buf);
        meta["images"][id] = name;
    }
    for (const auto& [id, m] : slice.labels) {
        const std::string name = seq_file_stem(id) + "_label.raw";
        write_bytes(dir + "/" + name, m.raw());
        meta["labels"][id] = name;
    }
    if (slice.gold_common) {
        write_bytes(dir + "/gold_common.raw", slice.gold_common->raw());
        meta["gold_common"] = "gold_common.raw";
    }
    save_json(dir + "/slice.json", meta);
}

MultiSeqSlice read_slice(const std::string& dir) {
    const json meta = load_json(dir + "/slice.json");
    if (meta.value("schema", "") != "umyops-slice-v1")
        throw IoError(dir + ": unknown slice schema");

    MultiSeqSlice s;
    s.h = meta.at("h").get<int>();
    s.w = meta.at("w").get<int>();
    s.spacing = {meta.at("spacing")[0].get<double>(), meta.at("spacing")[1].get<double>()};
    s.cri = meta.at("cri").get<std::string>();
    s.source = meta.value("source", "");
    if (meta.contains("slice_index"))
        s.slice_index = meta.at("slice_index").get<std::map<std::string, int>>();

    const size_t npx = static_cast<size_t>(s.h) * s.w;
    if (meta.contains("images")) {
        for (const auto& [id, name] : meta.at("images").items()) {
            const auto buf = read_floats(dir + "/" + name.get<std::string>(), npx);
            ImageD img(s.h, s.w);
            for (size_t i = 0; i < npx; ++i) img.raw()[i] = buf[i];
            s.images[id] = std::move(img);
        }
    }
    if (meta.contains("labels")) {
        for (const auto& [id, name] : meta.at("labels").items()) {
            const auto buf = read_bytes(dir + "/" + name.get<std::string>(), npx);
            LabelMask m(s.h, s.w);
            m.raw() = buf;
            s.labels[id] = std::move(m);
        }
    }
    if (meta.contains("gold_common")) {
        const auto buf = read_bytes(dir + "/" + meta.at("gold_common").get<std::string>(), npx);
        LabelMask m(s.h, s.w);
        m.raw() = buf;
        s.gold_common = std::move(m);
    }
    if (!s.consistent()) throw IoError(dir + ": inconsistent slice on disk");
    return s;
}

json displacement_to_json(const tps::DisplacementSet& d) {
    json j;
    j["frame"] = {d.frame_h, d.frame_w};
    json dx = json::array(), dy = json::array();
    for (const auto& e : d.deltas) {
        dx.push_back(e[0]);
        dy.push_back(e[1]);
    }
    j["dx"] = std::move(dx);
    j["dy"] = std::move(dy);
    return j;
}

tps::DisplacementSet displacement_from_json(const json& j) {
    tps::DisplacementSet d;
    d.frame_h = j.at("frame")[0].get<double>();
    d.frame_w = j.at("frame")[1].get<double>();
    const auto& dx = j.at("dx");
    const auto& dy = j.at("dy");
    if (dx.size() != dy.size()) throw IoError("displacement_from_json: dx/dy size mismatch");
    for (size_t i = 0; i < dx.size(); ++i)
        d.deltas.push_back({dx[i].get<double>(), dy[i].get<double>()});
    return d;
}

void write_dataset(const std::string& dir, const std::vector<PhantomSample>& samples,
                   const std::vector<uint64_t>& seeds, const json& extra) {
    if (seeds.size() != samples.size())
        throw InvalidArgument("write_dataset: one seed per sample required");
    fs::create_directories(dir);

    json manifest;
    manifest["schema"] = "umyops-dataset-v1";
    manifest["extra"] = extra;
    json list = json::array();
    for (size_t i = 0; i < samples.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "sample_%04zu", i);
        write_slice(dir + "/" + name, samples[i].slice);
        json entry;
        entry["dir"] = name;
        entry["seed"] = seeds[i];
        for (const auto& [seq, d] : samples[i].gt_disp)
            entry["gt_disp"][seq] = displacement_to_json(d);
        list.push_back(std::move(entry));
    }
    manifest["samples"] = std::move(list);
    save_json(dir + "/manifest.json", manifest);
}

Dataset read_dataset(const std::string& dir) {
    Dataset ds;
    ds.root = dir;
    ds.manifest = load_json(dir + "/manifest.json");
    if (ds.manifest.value("schema", "") != "umyops-dataset-v1")
        throw IoError(dir + ": unknown dataset schema");
    for (const auto& entry : ds.manifest.at("samples")) {
        DatasetEntry e;
        e.dir = entry.at("dir").get<std::string>();
        e.seed = entry.value("seed", 0ULL);
        if (entry.contains("gt_disp"))
            for (const auto& [seq, dj] : entry.at("gt_disp").items())
                e.gt_disp[seq] = displacement_from_json(dj);
        ds.entries.push_back(std::move(e));
    }
    return ds;
}

MultiSeqSlice Dataset::load(size_t i) const {
    if (i >= entries.size()) throw InvalidArgument("Dataset::load: index out of range");
    return read_slice(root + "/" + entries[i].dir);
}

} // namespace umyops::data
