#include <cstring>
#include <fstream>
#include <stdexcept>

#include "refcolor/train/checkpoint.hpp"

namespace refcolor::train {

namespace {

constexpr char kMagic[8] = {'R', 'F', 'C', 'O', 'L', 'C', 'K', '1'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::ofstream os;
    explicit Writer(const std::string& path) : os(path, std::ios::binary) {
        if (!os) throw std::runtime_error("checkpoint: cannot write " + path);
    }
    void raw(const void* p, std::size_t n) { os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    void u32(std::uint32_t v) { raw(&v, 4); }
    void u64(std::uint64_t v) { raw(&v, 8); }
    void str(const std::string& s) {
        u32(static_cast<std::uint32_t>(s.size()));
        raw(s.data(), s.size());
    }
};

struct Reader {
    std::ifstream is;
    std::string path;
    explicit Reader(const std::string& p) : is(p, std::ios::binary), path(p) {
        if (!is) throw std::runtime_error("checkpoint: cannot read " + p);
    }
    void raw(void* p, std::size_t n) {
        is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!is) throw std::runtime_error("checkpoint: truncated file " + path);
    }
    std::uint32_t u32() {
        std::uint32_t v;
        raw(&v, 4);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        raw(&v, 8);
        return v;
    }
    std::string str() {
        const auto n = u32();
        if (n > (1u << 24)) throw std::runtime_error("checkpoint: implausible string length in " + path);
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
};

void write_tensor_blob(Writer& w, const std::string& name, const Tensor& t) {
    w.str(name);
    w.os.put(static_cast<char>(t.dtype() == DType::F32 ? 0 : 1));
    w.u32(static_cast<std::uint32_t>(t.ndim()));
    for (auto d : t.shape()) w.u64(static_cast<std::uint64_t>(d));
    const std::size_t bytes = static_cast<std::size_t>(t.numel()) * dtype_size(t.dtype());
    w.u64(bytes);
    dispatch_dtype(t.dtype(), [&](auto tag) {
        using T = decltype(tag);
        auto d = t.data<T>();
        w.raw(d.data(), bytes);
    });
}

void write_f64_blob(Writer& w, const std::string& name, const std::vector<double>& v) {
    w.str(name);
    w.os.put(1);
    w.u32(1);
    w.u64(v.size());
    w.u64(v.size() * 8);
    w.raw(v.data(), v.size() * 8);
}

ParamBlob read_blob(Reader& r) {
    ParamBlob b;
    b.name = r.str();
    char dt;
    r.raw(&dt, 1);
    b.dtype = dt == 0 ? DType::F32 : DType::F64;
    const auto ndim = r.u32();
    if (ndim > 8) throw std::runtime_error("checkpoint: implausible rank");
    std::int64_t numel = 1;
    for (std::uint32_t i = 0; i < ndim; ++i) {
        b.shape.push_back(static_cast<std::int64_t>(r.u64()));
        numel *= b.shape.back();
    }
    const auto bytes = r.u64();
    if (bytes != static_cast<std::uint64_t>(numel) * dtype_size(b.dtype))
        throw std::runtime_error("checkpoint: blob size mismatch for " + b.name);
    b.values.resize(static_cast<std::size_t>(numel));
    if (b.dtype == DType::F32) {
        std::vector<float> tmp(static_cast<std::size_t>(numel));
        r.raw(tmp.data(), bytes);
        for (std::size_t i = 0; i < tmp.size(); ++i) b.values[i] = static_cast<double>(tmp[i]);
    } else {
        r.raw(b.values.data(), bytes);
    }
    return b;
}

void write_store(Writer& w, const std::string& prefix, const ParamStore& store) {
    std::uint64_t count = 0;
    for (const auto* p : store.all()) count += p->spectral_u.defined() ? 2 : 1;
    w.u64(count);
    for (const auto* p : store.all()) {
        write_tensor_blob(w, prefix + "." + p->name, p->tensor);
        if (p->spectral_u.defined()) write_tensor_blob(w, prefix + ".sn_u." + p->name, p->spectral_u);
    }
}

void write_adam(Writer& w, const std::string& prefix, const Adam& opt) {
    w.u64(static_cast<std::uint64_t>(opt.step_count()));
    // Deterministic order: named slots sorted by key.
    std::vector<std::string> keys;
    for (const auto& [k, v] : opt.state()) keys.push_back(k);
    std::sort(keys.begin(), keys.end());
    w.u64(keys.size() * 2);
    for (const auto& k : keys) {
        const auto& slot = opt.state().at(k);
        write_f64_blob(w, prefix + ".m." + k, slot.m);
        write_f64_blob(w, prefix + ".v." + k, slot.v);
    }
}

void read_adam(Reader& r, const std::string& prefix, Adam& opt) {
    opt.set_step_count(static_cast<std::int64_t>(r.u64()));
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        ParamBlob b = read_blob(r);
        const std::string mk = prefix + ".m.";
        const std::string vk = prefix + ".v.";
        if (b.name.rfind(mk, 0) == 0)
            opt.state()[b.name.substr(mk.size())].m = b.values;
        else if (b.name.rfind(vk, 0) == 0)
            opt.state()[b.name.substr(vk.size())].v = b.values;
        else
            throw std::runtime_error("checkpoint: unexpected optimizer blob " + b.name);
    }
}

} // namespace

void restore_params(ParamStore& store, const std::vector<ParamBlob>& blobs, const std::string& what) {
    for (const auto& b : blobs) {
        const bool is_sn = b.name.rfind("sn_u.", 0) == 0;
        const std::string pname = is_sn ? b.name.substr(5) : b.name;
        Parameter* p = store.find(pname);
        if (!p) throw std::runtime_error("checkpoint: " + what + " has unknown parameter " + pname);
        Tensor& dst = is_sn ? p->spectral_u : p->tensor;
        if (!dst.defined())
            throw std::runtime_error("checkpoint: " + what + " supplies spectral state for non-spectral " +
                                     pname);
        if (dst.shape() != b.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + pname + " (" +
                                     shape_str(b.shape) + " in file vs " + shape_str(dst.shape()) +
                                     " in model)");
        if (dst.dtype() != b.dtype)
            throw std::runtime_error("checkpoint: dtype mismatch for " + pname);
        dispatch_dtype(dst.dtype(), [&](auto tag) {
            using T = decltype(tag);
            auto d = dst.data<T>();
            for (std::size_t i = 0; i < b.values.size(); ++i) d[i] = static_cast<T>(b.values[i]);
        });
    }
}

ModelBundle ModelBundle::build(const TrainConfig& cfg) {
    cfg.validate();
    ModelBundle b;
    b.cfg = cfg;
    const DType dt = cfg.dtype();

    color::ColorNetConfig ccfg;
    ccfg.enc_channels = cfg.enc_channels;
    ccfg.embed_channels = cfg.embed_channels;
    ccfg.disc_channels = cfg.disc_channels;
    ccfg.dt = dt;
    Rng crng = Rng(cfg.seed).fork(0xC0102);
    b.color = std::make_unique<color::ColorModel>(ccfg, crng);

    temporal::TemporalNetConfig tcfg;
    tcfg.enc_channels = cfg.temporal_enc_channels;
    tcfg.dec_channels = cfg.temporal_dec_channels;
    tcfg.disc_channels = cfg.temporal_disc_channels;
    tcfg.dt = dt;
    Rng trng = Rng(cfg.seed).fork(0xC0103);
    b.temporal = std::make_unique<temporal::TemporalModel>(tcfg, trng);

    b.pyramid = std::make_unique<loss::FeaturePyramid>(splitmix64(cfg.seed ^ 0x97d1a51dULL), dt,
                                                       cfg.pyramid_channels);
    if (!cfg.pyramid_weights.empty()) b.pyramid->load_weights(cfg.pyramid_weights);
    return b;
}

TrainerState TrainerState::init(const TrainConfig& cfg) {
    TrainerState s{ModelBundle::build(cfg),
                   Adam(AdamOpts{cfg.lr_g, cfg.beta1, cfg.beta2, 1e-8}),
                   Adam(AdamOpts{cfg.lr_d, cfg.beta1, cfg.beta2, 1e-8}),
                   Adam(AdamOpts{cfg.lr_g, cfg.beta1, cfg.beta2, 1e-8}),
                   Adam(AdamOpts{cfg.lr_d, cfg.beta1, cfg.beta2, 1e-8}),
                   Rng(cfg.seed).fork(0xDA7A)};
    return s;
}

void save_checkpoint(const std::string& path, const TrainerState& state) {
    Writer w(path);
    w.raw(kMagic, 8);
    w.u32(kVersion);
    w.str(state.bundle.cfg.serialize());
    w.u64(static_cast<std::uint64_t>(state.step_color));
    w.u64(static_cast<std::uint64_t>(state.step_temporal));
    w.u64(static_cast<std::uint64_t>(state.step_finetune));
    w.u32(static_cast<std::uint32_t>(state.stage_done));
    w.str(state.data_rng.serialize());
    write_store(w, "color", state.bundle.color->params());
    write_store(w, "temporal", state.bundle.temporal->params());
    write_adam(w, "adam.color_g", state.opt_color_g);
    write_adam(w, "adam.color_d", state.opt_color_d);
    write_adam(w, "adam.temporal_g", state.opt_temporal_g);
    write_adam(w, "adam.temporal_d", state.opt_temporal_d);
    if (!w.os) throw std::runtime_error("checkpoint: write failed for " + path);
}

TrainerState load_checkpoint(const std::string& path) {
    Reader r(path);
    char magic[8];
    r.raw(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path);
    const auto version = r.u32();
    if (version != kVersion)
        throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version) + " in " +
                                 path);
    TrainConfig cfg = TrainConfig::parse(r.str());
    TrainerState state = TrainerState::init(cfg);
    state.step_color = static_cast<std::int64_t>(r.u64());
    state.step_temporal = static_cast<std::int64_t>(r.u64());
    state.step_finetune = static_cast<std::int64_t>(r.u64());
    state.stage_done = static_cast<int>(r.u32());
    state.data_rng = Rng::deserialize(r.str());

    for (const char* section : {"color", "temporal"}) {
        const auto n = r.u64();
        std::vector<ParamBlob> blobs;
        blobs.reserve(n);
        const std::string prefix = std::string(section) + ".";
        for (std::uint64_t i = 0; i < n; ++i) {
            ParamBlob b = read_blob(r);
            if (b.name.rfind(prefix, 0) != 0)
                throw std::runtime_error("checkpoint: blob " + b.name + " outside section " + section);
            b.name = b.name.substr(prefix.size());
            blobs.push_back(std::move(b));
        }
        ParamStore& store = std::string(section) == "color" ? state.bundle.color->params()
                                                            : state.bundle.temporal->params();
        restore_params(store, blobs, std::string(section) + " section of " + path);
    }
    read_adam(r, "adam.color_g", state.opt_color_g);
    read_adam(r, "adam.color_d", state.opt_color_d);
    read_adam(r, "adam.temporal_g", state.opt_temporal_g);
    read_adam(r, "adam.temporal_d", state.opt_temporal_d);
    return state;
}

} // namespace refcolor::train
