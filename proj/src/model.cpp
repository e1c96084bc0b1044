#include "umyops/nn/model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace umyops::nn {

using nlohmann::json;

void NetConfig::validate() const {
    if (levels < 2) throw InvalidArgument("NetConfig: need at least 2 levels");
    if (static_cast<int>(channels.size()) != levels)
        throw InvalidArgument("NetConfig: one channel width per level");
    for (const int c : channels)
        if (c <= 0) throw InvalidArgument("NetConfig: channel widths must be positive");
    if (image_size % (1 << (levels - 1)) != 0)
        throw InvalidArgument("NetConfig: image_size must divide by 2^(levels-1)");
    if (grid_m < 2) throw InvalidArgument("NetConfig: grid_m must be at least 2");
    if (convs_per_level < 1 || convs_per_level > 3)
        throw InvalidArgument("NetConfig: convs_per_level out of range");
    if (!(head_output_gain > 0))
        throw InvalidArgument("NetConfig: head_output_gain must be positive");
}

json NetConfig::to_json() const {
    return json{{"schema", "umyops-netconfig-v1"},
                {"levels", levels},
                {"channels", channels},
                {"image_size", image_size},
                {"grid_m", grid_m},
                {"canonical_extent", canonical_extent},
                {"convs_per_level", convs_per_level},
                {"head_output_gain", head_output_gain},
                {"init_seed", init_seed}};
}

NetConfig NetConfig::from_json(const json& j) {
    if (j.value("schema", "") != "umyops-netconfig-v1")
        throw IoError("NetConfig: unknown schema");
    NetConfig c;
    c.levels = j.at("levels").get<int>();
    c.channels = j.at("channels").get<std::vector<int>>();
    c.image_size = j.at("image_size").get<int>();
    c.grid_m = j.at("grid_m").get<int>();
    c.canonical_extent = j.at("canonical_extent").get<double>();
    c.convs_per_level = j.at("convs_per_level").get<int>();
    c.head_output_gain = j.value("head_output_gain", 32.0);
    c.init_seed = j.at("init_seed").get<uint64_t>();
    c.validate();
    return c;
}

namespace {

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace

Var ParamStore::get_or_create(const std::string& name, int c, int h, int w,
                              const std::function<void(Tensor&, Rng&)>& init) {
    auto it = params_.find(name);
    if (it != params_.end()) {
        const Tensor& t = it->second->val;
        if (t.c != c || t.h != h || t.w != w)
            throw InvalidArgument("ParamStore: shape mismatch for " + name);
        return it->second;
    }
    Tensor t(c, h, w);
    // per-name stream so initialization does not depend on creation order
    Rng rng(fnv1a(name.data(), name.size()) ^ seed_);
    init(t, rng);
    Var p = make_param(std::move(t), name);
    params_[name] = p;
    return p;
}

Var ParamStore::conv_weight(const std::string& name, int cout, int cin, int k) {
    const double std_dev = std::sqrt(2.0 / (static_cast<double>(cin) * k * k));
    return get_or_create(name, cout, cin * k * k, 1, [std_dev](Tensor& t, Rng& rng) {
        for (auto& v : t.v) v = static_cast<float>(std_dev * rng.gaussian());
    });
}

Var ParamStore::vector_bias(const std::string& name, int n) {
    return get_or_create(name, n, 1, 1, [](Tensor&, Rng&) {});
}

Var ParamStore::fc_weight(const std::string& name, int mout, int nin, bool zero_init) {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(nin + mout));
    return get_or_create(name, mout, nin, 1, [=](Tensor& t, Rng& rng) {
        if (zero_init) return;
        for (auto& v : t.v) v = static_cast<float>(std_dev * rng.gaussian());
    });
}

void ParamStore::freeze_prefix(const std::string& prefix) {
    for (auto& [name, p] : params_)
        if (name.rfind(prefix, 0) == 0) p->frozen = true;
}

bool ParamStore::any_frozen() const {
    for (const auto& [name, p] : params_)
        if (p->frozen) return true;
    return false;
}

std::vector<Var> ParamStore::trainable() const {
    std::vector<Var> out;
    for (const auto& [name, p] : params_)
        if (!p->frozen) out.push_back(p);
    return out;
}

void ParamStore::zero_grads() {
    for (auto& [name, p] : params_) p->zero_grad();
}

void ParamStore::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("ParamStore: cannot write " + path);
    const char magic[8] = {'U', 'M', 'Y', 'P', '1', '\n', 0, 0};
    out.write(magic, 8);
    const uint64_t count = params_.size();
    out.write(reinterpret_cast<const char*>(&count), 8);
    for (const auto& [name, p] : params_) {
        const uint32_t len = static_cast<uint32_t>(name.size());
        out.write(reinterpret_cast<const char*>(&len), 4);
        out.write(name.data(), len);
        const int32_t dims[3] = {p->val.c, p->val.h, p->val.w};
        out.write(reinterpret_cast<const char*>(dims), 12);
        out.write(reinterpret_cast<const char*>(p->val.v.data()),
                  static_cast<std::streamsize>(p->val.size() * sizeof(float)));
    }
}

void ParamStore::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("ParamStore: cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, "UMYP1\n", 6) != 0)
        throw IoError("ParamStore: bad magic in " + path);
    uint64_t count = 0;
    in.read(reinterpret_cast<char*>(&count), 8);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t len = 0;
        in.read(reinterpret_cast<char*>(&len), 4);
        if (!in || len > 4096) throw IoError("ParamStore: corrupt name length");
        std::string name(len, '\0');
        in.read(name.data(), len);
        int32_t dims[3];
        in.read(reinterpret_cast<char*>(dims), 12);
        Tensor t(dims[0], dims[1], dims[2]);
        in.read(reinterpret_cast<char*>(t.v.data()),
                static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!in) throw IoError("ParamStore: truncated data in " + path);
        auto it = params_.find(name);
        if (it != params_.end()) {
            if (!it->second->val.same_shape(t))
                throw IoError("ParamStore: checkpoint shape mismatch for " + name);
            it->second->val = std::move(t);
        } else {
            params_[name] = make_param(std::move(t), name);
        }
    }
}

uint64_t ParamStore::digest() const { return digest_prefix(""); }

uint64_t ParamStore::digest_prefix(const std::string& prefix) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& [name, p] : params_) {
        if (name.rfind(prefix, 0) != 0) continue;
        h = fnv1a(name.data(), name.size(), h);
        h = fnv1a(p->val.v.data(), p->val.size() * sizeof(float), h);
    }
    return h;
}

UMyoPSNet::UMyoPSNet(NetConfig cfg_) : cfg(std::move(cfg_)), params(cfg.init_seed) {
    cfg.validate();
}

const tps::WarpBasis& UMyoPSNet::basis_for(int size) {
    auto it = basis_.find(size);
    if (it != basis_.end()) return it->second;
    const double s = size / cfg.canonical_extent;
    const auto grid = tps::scale_control_grid(tps::make_control_grid(cfg.grid_m, cfg.canonical_extent), s, s);
    auto [pos, ok] = basis_.emplace(size, tps::make_warp_basis(grid, size, size));
    return pos->second;
}

Var UMyoPSNet::conv_block(const std::string& name, Var x, int cin, int cout) {
    for (int i = 0; i < cfg.convs_per_level; ++i) {
        const std::string base = name + "/conv" + std::to_string(i);
        const int in_ch = i == 0 ? cin : cout;
        x = relu(conv2d(x, params.conv_weight(base + "/w", cout, in_ch, 3),
                        params.vector_bias(base + "/b", cout), cout, in_ch, 3));
    }
    return x;
}

EncoderFeatures UMyoPSNet::encode(const std::string& enc_name, const Var& image, int in_channels) {
    if (image->val.c != in_channels) throw InvalidArgument("encode: channel mismatch");
    EncoderFeatures f;
    Var x = image;
    int cin = in_channels;
    for (int l = 0; l < cfg.levels; ++l) {
        if (l > 0) x = maxpool2(x);
        x = conv_block(enc_name + "/l" + std::to_string(l), x, cin, cfg.channels[l]);
        cin = cfg.channels[l];
        f.level.push_back(x);
    }
    return f;
}

Var UMyoPSNet::reg_head(const std::string& head_name, const EncoderFeatures& src,
                        const EncoderFeatures& cri) {
    const int c_deep = cfg.channels.back();
    const Var pooled = concat({global_avg_pool(src.level.back()), global_avg_pool(cri.level.back())});
    const int hidden = c_deep;
    Var x = relu(fully_connected(pooled, params.fc_weight(head_name + "/fc0/w", hidden, 2 * c_deep, false),
                                 params.vector_bias(head_name + "/fc0/b", hidden), hidden, 2 * c_deep));
    // zero-initialized output layer: training starts from the identity warp
    x = fully_connected(x, params.fc_weight(head_name + "/fc1/w", delta_dim(), hidden, true),
                        params.vector_bias(head_name + "/fc1/b", delta_dim()), delta_dim(), hidden);
    x = scale(x, static_cast<float>(cfg.head_output_gain));
    if (!x->val.finite()) throw NumericError(head_name + ": non-finite displacement prediction");
    return x;
}

Var UMyoPSNet::warp_by_delta(const Var& x, const Var& delta_canonical) {
    const int size = x->val.h;
    if (x->val.w != size) throw InvalidArgument("warp_by_delta: raster must be square");
    return tps_warp(x, delta_canonical, basis_for(size), size / cfg.canonical_extent);
}

Var UMyoPSNet::msf_fuse(const Var& f_in, const Var& f_bssfp, const Var& f_t2, const Var& f_lge,
                        const Var& delta_bssfp, const Var& delta_t2, double delta_frame) {
    if (!(f_bssfp->val.same_shape(f_t2->val) && f_t2->val.same_shape(f_lge->val)))
        throw InvalidArgument("msf_fuse: encoder feature shapes differ");
    if (f_in->val.h != f_lge->val.h || f_in->val.w != f_lge->val.w)
        throw InvalidArgument("msf_fuse: decoder stream is at a different level");
    const int size = f_lge->val.h;
    if (f_lge->val.w != size) throw InvalidArgument("msf_fuse: raster must be square");
    const double scale = size / delta_frame;   // Eq.-style h/H parameter adjustment
    const auto& basis = basis_for(size);
    const Var wb = tps_warp(f_bssfp, delta_bssfp, basis, scale);
    const Var wt = tps_warp(f_t2, delta_t2, basis, scale);
    return concat({wb, wt, f_lge, f_in});
}

Var UMyoPSNet::spg_gate(const Var& f_in, const Var& f_mp, const Var& myo_prob) {
    if (!f_in->val.same_shape(f_mp->val)) throw InvalidArgument("spg_gate: shape mismatch");
    if (myo_prob->val.c != 1) throw InvalidArgument("spg_gate: prior must be single-channel");
    Var prior = myo_prob;
    if (prior->val.h != f_in->val.h || prior->val.w != f_in->val.w)
        prior = resize_bilinear(prior, f_in->val.h, f_in->val.w);
    const Var attention = sigmoid(mul_bcast(add(f_in, f_mp), prior));
    return concat({mul(f_mp, attention), f_in});
}

Var UMyoPSNet::decode_myo_plain(const std::string& dec_name, const EncoderFeatures& own) {
    Var d = own.level.back();
    for (int l = cfg.levels - 2; l >= 0; --l) {
        const Var up = upsample_nearest2(d);
        const int cin = cfg.channels[l + 1] + cfg.channels[l];
        d = conv_block(dec_name + "/dec" + std::to_string(l), concat({up, own.level[l]}),
                       cin, cfg.channels[l]);
    }
    const Var logit = conv2d(d, params.conv_weight(dec_name + "/head/w", 1, cfg.channels[0], 1),
                             params.vector_bias(dec_name + "/head/b", 1), 1, cfg.channels[0], 1);
    return sigmoid(logit);
}

Var UMyoPSNet::decode_myo_msf(const EncoderFeatures& lge, const EncoderFeatures& bssfp,
                              const EncoderFeatures& t2, const Var& delta_bssfp,
                              const Var& delta_t2) {
    Var d = lge.level.back();
    for (int l = cfg.levels - 2; l >= 0; --l) {
        const Var up = upsample_nearest2(d);
        const Var fused = msf_fuse(up, bssfp.level[l], t2.level[l], lge.level[l],
                                   delta_bssfp, delta_t2, cfg.canonical_extent);
        const int cin = cfg.channels[l + 1] + 3 * cfg.channels[l];
        d = conv_block("D_LGE/dec" + std::to_string(l), fused, cin, cfg.channels[l]);
    }
    const Var logit = conv2d(d, params.conv_weight("D_LGE/head/w", 1, cfg.channels[0], 1),
                             params.vector_bias("D_LGE/head/b", 1), 1, cfg.channels[0], 1);
    return sigmoid(logit);
}

Var UMyoPSNet::pathology_logits(const Var& aligned3, const Var& myo_prior) {
    const EncoderFeatures mp = encode("E_MP", aligned3, 3);
    Var d = mp.level.back();
    for (int l = cfg.levels - 2; l >= 0; --l) {
        const std::string tag = std::to_string(l);
        const Var up = upsample_nearest2(d);
        const Var f_in = conv_block("D_MP/up" + tag, up, cfg.channels[l + 1], cfg.channels[l]);
        const Var gated = spg_gate(f_in, mp.level[l], myo_prior);
        d = conv_block("D_MP/dec" + tag, gated, 2 * cfg.channels[l], cfg.channels[l]);
    }
    return conv2d(d, params.conv_weight("D_MP/head/w", kPathologyClasses, cfg.channels[0], 1),
                  params.vector_bias("D_MP/head/b", kPathologyClasses), kPathologyClasses,
                  cfg.channels[0], 1);
}

void save_checkpoint(const std::string& dir, const UMyoPSNet& net, const json& manifest) {
    std::filesystem::create_directories(dir);
    net.params.save(dir + "/params.bin");
    {
        std::ofstream out(dir + "/config.json");
        if (!out) throw IoError("save_checkpoint: cannot write config");
        json j;
        j["schema"] = "umyops-checkpoint-v1";
        j["net"] = net.cfg.to_json();
        out << j.dump(2) << '\n';
    }
    {
        std::ofstream out(dir + "/manifest.json");
        if (!out) throw IoError("save_checkpoint: cannot write manifest");
        json m = manifest;
        m["params_digest"] = net.params.digest();
        out << m.dump(2) << '\n';
    }
}

std::unique_ptr<UMyoPSNet> load_checkpoint(const std::string& dir) {
    std::ifstream in(dir + "/config.json");
    if (!in) throw IoError("load_checkpoint: missing config.json in " + dir);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw IoError(std::string("load_checkpoint: bad config.json: ") + e.what());
    }
    if (j.value("schema", "") != "umyops-checkpoint-v1")
        throw IoError("load_checkpoint: unknown checkpoint schema");
    auto net = std::make_unique<UMyoPSNet>(NetConfig::from_json(j.at("net")));
    net->params.load(dir + "/params.bin");
    return net;
}

} // namespace umyops::nn
