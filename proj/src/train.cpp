#include "msgan/train.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "msgan/arch.hpp"
#include "msgan/filters.hpp"
#include "msgan/kernels.hpp"
#include "msgan/losses.hpp"
#include "msgan/resample.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload io assumes a little-endian host");

namespace msgan {

namespace {

constexpr double kAdamEps = 1e-8;

// Stream tags for key derivation; distinct per purpose so adding a new
// consumer never shifts an existing stream.
constexpr std::uint64_t kTagStep = 0x73746570ull;       // batch sampling
constexpr std::uint64_t kTagGenInit = 0x67656eull;      // generator init
constexpr std::uint64_t kTagDiscInit = 0x64697363ull;   // discriminator init

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument("config: bad integer for '" + key + "': " + v);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        throw std::invalid_argument("config: bad unsigned integer for '" + key + "': " + v);
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    if (v.empty()) throw std::invalid_argument("config: empty value for '" + key + "'");
    char* end = nullptr;
    double out = std::strtod(v.c_str(), &end);
    if (end != v.c_str() + v.size())
        throw std::invalid_argument("config: bad number for '" + key + "': " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1") return true;
    if (v == "0") return false;
    throw std::invalid_argument("config: '" + key + "' must be 0 or 1, got: " + v);
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    if (cfg.batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (!(cfg.learning_rate > 0.0))
        throw std::invalid_argument("config: learning_rate must be positive");
    if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0))
        throw std::invalid_argument("config: beta1 must be in [0, 1)");
    if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0))
        throw std::invalid_argument("config: beta2 must be in [0, 1)");
    if (!(cfg.corrupt_fraction >= 0.0 && cfg.corrupt_fraction <= 1.0))
        throw std::invalid_argument("config: corrupt_fraction must be in [0, 1]");
    if (!(cfg.edge_flip_fraction >= 0.0 && cfg.edge_flip_fraction <= 1.0))
        throw std::invalid_argument("config: edge_flip_fraction must be in [0, 1]");
    if (!(cfg.corrupt_noise_min >= 0.0 && cfg.corrupt_noise_min <= cfg.corrupt_noise_max))
        throw std::invalid_argument("config: corrupt noise range must satisfy 0 <= min <= max");
    if (!(cfg.corrupt_blur_min > 0.0 && cfg.corrupt_blur_min <= cfg.corrupt_blur_max))
        throw std::invalid_argument("config: corrupt blur range must satisfy 0 < min <= max");
    if (!(cfg.pixel_loss_weight >= 0.0))
        throw std::invalid_argument("config: pixel_loss_weight must be >= 0");
}

std::string config_to_text(const TrainConfig& cfg) {
    std::string out;
    auto kv = [&out](const char* k, const std::string& v) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    };
    kv("epochs", std::to_string(cfg.epochs));
    kv("batch_size", std::to_string(cfg.batch_size));
    kv("learning_rate", fmt_double(cfg.learning_rate));
    kv("beta1", fmt_double(cfg.beta1));
    kv("beta2", fmt_double(cfg.beta2));
    kv("corrupt_fraction", fmt_double(cfg.corrupt_fraction));
    kv("corrupt_noise_min", fmt_double(cfg.corrupt_noise_min));
    kv("corrupt_noise_max", fmt_double(cfg.corrupt_noise_max));
    kv("corrupt_blur_min", fmt_double(cfg.corrupt_blur_min));
    kv("corrupt_blur_max", fmt_double(cfg.corrupt_blur_max));
    kv("edge_flip_fraction", fmt_double(cfg.edge_flip_fraction));
    kv("pixel_loss_weight", fmt_double(cfg.pixel_loss_weight));
    kv("seed", std::to_string(cfg.seed));
    kv("corrupt_noise", cfg.corrupt_noise ? "1" : "0");
    kv("corrupt_blur", cfg.corrupt_blur ? "1" : "0");
    kv("corrupt_downup", cfg.corrupt_downup ? "1" : "0");
    kv("hr_edge_only", cfg.hr_edge_only ? "1" : "0");
    return out;
}

TrainConfig parse_train_config(const std::string& text) {
    TrainConfig cfg;
    std::map<std::string, int> seen;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        std::string line = text.substr(pos, nl == std::string::npos ? nl : nl - pos);
        pos = nl == std::string::npos ? text.size() : nl + 1;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: expected 'key = value', got: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw std::invalid_argument("config: empty key in line: " + line);
        if (++seen[key] > 1) throw std::invalid_argument("config: repeated key '" + key + "'");
        if (key == "epochs")
            cfg.epochs = static_cast<int>(parse_int(key, val));
        else if (key == "batch_size")
            cfg.batch_size = static_cast<int>(parse_int(key, val));
        else if (key == "learning_rate")
            cfg.learning_rate = parse_double(key, val);
        else if (key == "beta1")
            cfg.beta1 = parse_double(key, val);
        else if (key == "beta2")
            cfg.beta2 = parse_double(key, val);
        else if (key == "corrupt_fraction")
            cfg.corrupt_fraction = parse_double(key, val);
        else if (key == "corrupt_noise_min")
            cfg.corrupt_noise_min = parse_double(key, val);
        else if (key == "corrupt_noise_max")
            cfg.corrupt_noise_max = parse_double(key, val);
        else if (key == "corrupt_blur_min")
            cfg.corrupt_blur_min = parse_double(key, val);
        else if (key == "corrupt_blur_max")
            cfg.corrupt_blur_max = parse_double(key, val);
        else if (key == "edge_flip_fraction")
            cfg.edge_flip_fraction = parse_double(key, val);
        else if (key == "pixel_loss_weight")
            cfg.pixel_loss_weight = parse_double(key, val);
        else if (key == "seed")
            cfg.seed = parse_u64(key, val);
        else if (key == "corrupt_noise")
            cfg.corrupt_noise = parse_bool(key, val);
        else if (key == "corrupt_blur")
            cfg.corrupt_blur = parse_bool(key, val);
        else if (key == "corrupt_downup")
            cfg.corrupt_downup = parse_bool(key, val);
        else if (key == "hr_edge_only")
            cfg.hr_edge_only = parse_bool(key, val);
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    validate_config(cfg);
    return cfg;
}

std::uint64_t config_hash(const TrainConfig& cfg) {
    TrainConfig c = cfg;
    c.epochs = 0;  // training length is excluded: a longer run extends a shorter one
    return fnv1a(config_to_text(c));
}

void adam_step(NetParams<float>& params, AdamState& st, const float* g, const TrainConfig& cfg) {
    const std::size_t n = params.flat.size();
    if (st.m.empty() && st.v.empty() && st.t == 0) {
        st.m.assign(n, 0.0f);
        st.v.assign(n, 0.0f);
    }
    if (st.m.size() != n || st.v.size() != n)
        throw std::logic_error("adam_step: optimizer state does not match parameter count");
    ++st.t;
    const double b1 = cfg.beta1, b2 = cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = static_cast<double>(g[i]);
        const double m = b1 * static_cast<double>(st.m[i]) + (1.0 - b1) * gi;
        const double v = b2 * static_cast<double>(st.v[i]) + (1.0 - b2) * gi * gi;
        st.m[i] = static_cast<float>(m);
        st.v[i] = static_cast<float>(v);
        const double step = cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + kAdamEps);
        params.flat[i] = static_cast<float>(static_cast<double>(params.flat[i]) - step);
    }
}

// ---------------------------------------------------------------------------
// Checkpoint io. Layout: a text header (magic line, key = value scalars, the
// two architecture descriptions, an end marker) followed by six raw float32
// little-endian blobs: generator params, discriminator params, then the Adam
// m and v accumulators for each in the same order.

namespace {

void write_blob(std::ofstream& f, const tracked_vector<float>& v) {
    f.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_blob(std::ifstream& f, tracked_vector<float>& v, std::size_t count,
               const std::string& what) {
    v.assign(count, 0.0f);
    f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (static_cast<std::size_t>(f.gcount()) != count * sizeof(float))
        throw std::runtime_error("checkpoint: truncated " + what + " blob");
}

const std::string& require_key(const std::map<std::string, std::string>& kv,
                               const std::string& key) {
    auto it = kv.find(key);
    if (it == kv.end()) throw std::runtime_error("checkpoint: missing header key '" + key + "'");
    return it->second;
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    if (c.gen.flat.size() != c.gen.layout.total || c.disc.flat.size() != c.disc.layout.total)
        throw std::logic_error("save_checkpoint: parameter blob does not match layout");
    if (c.gen_opt.m.size() != c.gen.flat.size() || c.gen_opt.v.size() != c.gen.flat.size() ||
        c.disc_opt.m.size() != c.disc.flat.size() || c.disc_opt.v.size() != c.disc.flat.size())
        throw std::logic_error("save_checkpoint: optimizer state does not match parameters");
    std::string header = "MSGAN001\n";
    header += "scale = " + std::to_string(c.scale) + "\n";
    header += "epoch = " + std::to_string(c.epoch) + "\n";
    header += "config_hash = " + std::to_string(c.cfg_hash) + "\n";
    header += "gen_seed = " + std::to_string(c.gen.seed) + "\n";
    header += "disc_seed = " + std::to_string(c.disc.seed) + "\n";
    header += "gen_opt_t = " + std::to_string(c.gen_opt.t) + "\n";
    header += "disc_opt_t = " + std::to_string(c.disc_opt.t) + "\n";
    header += "gen_param_count = " + std::to_string(c.gen.flat.size()) + "\n";
    header += "disc_param_count = " + std::to_string(c.disc.flat.size()) + "\n";
    header += arch_to_text(c.gen.arch, "gen_");
    header += arch_to_text(c.disc.arch, "disc_");
    header += "end_header\n";

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_blob(f, c.gen.flat);
    write_blob(f, c.disc.flat);
    write_blob(f, c.gen_opt.m);
    write_blob(f, c.gen_opt.v);
    write_blob(f, c.disc_opt.m);
    write_blob(f, c.disc_opt.v);
    f.flush();
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string line;
    if (!std::getline(f, line) || line != "MSGAN001")
        throw std::runtime_error("checkpoint: bad magic in " + path);
    std::map<std::string, std::string> kv;
    bool ended = false;
    while (std::getline(f, line)) {
        if (line == "end_header") {
            ended = true;
            break;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("checkpoint: malformed header line: " + line);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (!kv.emplace(key, val).second)
            throw std::runtime_error("checkpoint: repeated header key '" + key + "'");
    }
    if (!ended) throw std::runtime_error("checkpoint: missing end_header in " + path);

    Checkpoint c;
    c.scale = static_cast<int>(parse_int("scale", require_key(kv, "scale")));
    c.epoch = static_cast<int>(parse_int("epoch", require_key(kv, "epoch")));
    c.cfg_hash = parse_u64("config_hash", require_key(kv, "config_hash"));
    c.gen.seed = parse_u64("gen_seed", require_key(kv, "gen_seed"));
    c.disc.seed = parse_u64("disc_seed", require_key(kv, "disc_seed"));
    c.gen_opt.t = parse_int("gen_opt_t", require_key(kv, "gen_opt_t"));
    c.disc_opt.t = parse_int("disc_opt_t", require_key(kv, "disc_opt_t"));
    const std::uint64_t gen_count = parse_u64("gen_param_count", require_key(kv, "gen_param_count"));
    const std::uint64_t disc_count =
        parse_u64("disc_param_count", require_key(kv, "disc_param_count"));

    c.gen.arch = arch_from_kv(kv, "gen_");
    c.disc.arch = arch_from_kv(kv, "disc_");
    c.gen.layout = param_layout(c.gen.arch);
    c.disc.layout = param_layout(c.disc.arch);
    if (c.gen.layout.total != gen_count)
        throw std::runtime_error("checkpoint: generator parameter count does not match its architecture");
    if (c.disc.layout.total != disc_count)
        throw std::runtime_error("checkpoint: discriminator parameter count does not match its architecture");

    read_blob(f, c.gen.flat, gen_count, "generator parameter");
    read_blob(f, c.disc.flat, disc_count, "discriminator parameter");
    read_blob(f, c.gen_opt.m, gen_count, "generator optimizer m");
    read_blob(f, c.gen_opt.v, gen_count, "generator optimizer v");
    read_blob(f, c.disc_opt.m, disc_count, "discriminator optimizer m");
    read_blob(f, c.disc_opt.v, disc_count, "discriminator optimizer v");
    f.peek();
    if (!f.eof()) throw std::runtime_error("checkpoint: trailing bytes in " + path);
    return c;
}

// ---------------------------------------------------------------------------
// Conditioning corruption.

std::pair<Volume, Volume> corrupt_condition(const Volume& lowres_up_patch,
                                            const Volume& edge_patch, const TrainConfig& cfg,
                                            Rng& rng) {
    validate_config(cfg);
    if (!lowres_up_patch.same_shape(edge_patch))
        throw std::invalid_argument("corrupt_condition: patch shapes differ");
    Volume img = lowres_up_patch;
    Volume ed = edge_patch;
    if (!rng.bernoulli(cfg.corrupt_fraction)) return {std::move(img), std::move(ed)};
    if (cfg.corrupt_noise) {
        const double std = rng.uniform(cfg.corrupt_noise_min, cfg.corrupt_noise_max);
        for (float& x : img.data) x = static_cast<float>(x + std * rng.normal());
    }
    if (cfg.corrupt_blur) {
        const double sigma = rng.uniform(cfg.corrupt_blur_min, cfg.corrupt_blur_max);
        img = gaussian_blur(img, sigma);
    }
    if (cfg.corrupt_downup) {
        for (int a = 0; a < img.ndim; ++a)
            if (img.shape[a] % 2 != 0)
                throw std::invalid_argument(
                    "corrupt_condition: resolution-drop corruption needs even extents");
        img = upsample2(downsample2(img));
    }
    for (float& x : img.data) x = clamp_canonical(x);
    for (float& e : ed.data)
        if (rng.bernoulli(cfg.edge_flip_fraction)) e = (e == 0.0f) ? 1.0f : 0.0f;
    return {std::move(img), std::move(ed)};
}

// ---------------------------------------------------------------------------
// Training.

namespace {

struct DataShape {
    int ndim = 0;
    int base_size = 0;
    int n_scales = 0;
};

DataShape check_dataset(const TrainSet& data) {
    if (data.empty()) throw std::invalid_argument("train: dataset is empty");
    DataShape s;
    const Pyramid& first = data[0].condition;
    if (first.images.empty()) throw std::invalid_argument("train: example has no scales");
    s.ndim = first.images[0].ndim;
    s.base_size = first.base_size;
    s.n_scales = first.n_scales;
    for (const TrainExample& ex : data) {
        if (ex.condition.base_size != s.base_size || ex.condition.n_scales != s.n_scales ||
            ex.target.base_size != s.base_size || ex.target.n_scales != s.n_scales)
            throw std::invalid_argument("train: examples disagree on pyramid geometry");
        if (ex.condition.images[0].ndim != s.ndim || ex.target.images[0].ndim != s.ndim)
            throw std::invalid_argument("train: examples disagree on dimensionality");
        for (int k = 0; k <= s.n_scales; ++k) {
            if (!ex.condition.images[k].same_shape(ex.target.images[k]) ||
                !ex.condition.edges[k].same_shape(ex.condition.images[k]))
                throw std::invalid_argument("train: condition and target shapes differ");
        }
    }
    return s;
}

// Everything one sample contributes to a step: the traced generator forward
// plus the tensors both optimization phases read.
struct Slot {
    Tensor<float> gin;
    Trace<float> gtrace;
    Tensor<float> fake;
    Tensor<float> cond;    // channels the discriminator is conditioned on
    Tensor<float> target;  // ground-truth image channel
};

std::uint64_t step_stream_key(const TrainConfig& cfg, int scale, int epoch, int step) {
    std::uint64_t h = hash_combine(cfg.seed, kTagStep);
    h = hash_combine(h, static_cast<std::uint64_t>(scale));
    h = hash_combine(h, static_cast<std::uint64_t>(epoch));
    h = hash_combine(h, static_cast<std::uint64_t>(step));
    return h;
}

Slot make_slot(const TrainSet& data, int scale, int margin, const TrainConfig& cfg,
               const NetParams<float>& gen, Rng& rng) {
    Slot slot;
    const TrainExample& ex = data[static_cast<std::size_t>(rng.uniform_int(
        static_cast<int>(data.size())))];
    if (scale == 0) {
        const Volume& edge = ex.condition.edges[0];
        const Volume& target = ex.target.images[0];
        const std::uint64_t zseed = rng.next_u64();
        const Volume noise = make_noise(zseed, 0, {0, 0, 0}, edge);
        slot.gin = tensor_from_volumes({&edge, &noise});
        slot.cond = tensor_from_volumes({&edge});
        slot.target = tensor_from_volumes({&target});
    } else {
        const Volume& full_edge = ex.condition.edges[scale];
        std::array<int, 3> origin{0, 0, 0};
        for (int a = 0; a < full_edge.ndim; ++a) {
            const int span = full_edge.shape[a] - kPatchSize + 1;
            if (span < 1)
                throw std::invalid_argument("train: scale image smaller than one patch");
            origin[a] = margin + rng.uniform_int(span);
        }
        std::array<int, 3> start{0, 0, 0};
        for (int a = 0; a < full_edge.ndim; ++a) start[a] = origin[a] - margin;
        Volume edge_patch = extract_window(full_edge, start, kPatchSize);
        Volume target_patch = extract_window(ex.target.images[scale], start, kPatchSize);
        if (cfg.hr_edge_only) {
            const std::uint64_t zseed = rng.next_u64();
            const Volume noise = make_noise(zseed, scale, origin, edge_patch);
            slot.gin = tensor_from_volumes({&edge_patch, &noise});
            slot.cond = tensor_from_volumes({&edge_patch});
        } else {
            Volume low_patch =
                upsampled_window(ex.target.images[scale - 1], start, kPatchSize);
            auto corr = corrupt_condition(low_patch, edge_patch, cfg, rng);
            const std::uint64_t zseed = rng.next_u64();
            const Volume noise = make_noise(zseed, scale, origin, corr.second);
            slot.gin = tensor_from_volumes({&corr.second, &corr.first, &noise});
            slot.cond = tensor_from_volumes({&corr.second, &corr.first});
        }
        slot.target = tensor_from_volumes({&target_patch});
    }
    slot.fake = net_forward(gen, slot.gin, &slot.gtrace);
    return slot;
}

}  // namespace

Checkpoint train_scale(const TrainSet& data, int scale, const TrainConfig& cfg,
                       std::ostream* log, std::vector<StepStats>* stats,
                       const Checkpoint* resume) {
    validate_config(cfg);
    const DataShape shape = check_dataset(data);
    if (scale < 0 || scale > shape.n_scales)
        throw std::out_of_range("train_scale: scale " + std::to_string(scale) +
                                " outside [0, " + std::to_string(shape.n_scales) + "]");

    const int hr_in = cfg.hr_edge_only ? 2 : 3;
    const ArchSpec garch = scale == 0 ? lr_generator_arch(shape.ndim)
                                      : hr_generator_arch(shape.ndim, hr_in);
    const ArchSpec darch = discriminator_arch(shape.ndim, scale == 0 ? 2 : hr_in);
    const int margin = scale == 0 ? 0 : trim_margin(garch);
    const std::uint64_t cfg_h = config_hash(cfg);

    NetParams<float> gen, disc;
    AdamState gen_opt, disc_opt;
    int start_epoch = 0;
    if (resume) {
        if (resume->scale != scale)
            throw std::invalid_argument("train_scale: checkpoint is for scale " +
                                        std::to_string(resume->scale));
        if (resume->cfg_hash != cfg_h)
            throw std::invalid_argument(
                "train_scale: checkpoint was trained with a different configuration");
        if (arch_to_text(resume->gen.arch, "a_") != arch_to_text(garch, "a_") ||
            arch_to_text(resume->disc.arch, "a_") != arch_to_text(darch, "a_"))
            throw std::invalid_argument(
                "train_scale: checkpoint architecture does not match this dataset");
        if (resume->epoch > cfg.epochs)
            throw std::invalid_argument("train_scale: checkpoint already has " +
                                        std::to_string(resume->epoch) + " epochs, asked for " +
                                        std::to_string(cfg.epochs));
        gen = resume->gen;
        disc = resume->disc;
        gen_opt = resume->gen_opt;
        disc_opt = resume->disc_opt;
        start_epoch = resume->epoch;
    } else {
        gen = init_net<float>(garch, hash_combine(hash_combine(cfg.seed, kTagGenInit),
                                                  static_cast<std::uint64_t>(scale)));
        disc = init_net<float>(darch, hash_combine(hash_combine(cfg.seed, kTagDiscInit),
                                                   static_cast<std::uint64_t>(scale)));
        gen_opt.m.assign(gen.flat.size(), 0.0f);
        gen_opt.v.assign(gen.flat.size(), 0.0f);
        disc_opt.m.assign(disc.flat.size(), 0.0f);
        disc_opt.v.assign(disc.flat.size(), 0.0f);
    }

    const int n = static_cast<int>(data.size());
    const int steps = (n + cfg.batch_size - 1) / cfg.batch_size;
    const int cond_channels = (scale == 0 || cfg.hr_edge_only) ? 1 : 2;

    tracked_vector<float> g_disc(disc.flat.size(), 0.0f);
    tracked_vector<float> g_gen(gen.flat.size(), 0.0f);
    tracked_vector<float> g_scratch(disc.flat.size(), 0.0f);  // discarded input-pass grads

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        double epoch_d = 0.0, epoch_g = 0.0;
        for (int step = 0; step < steps; ++step) {
            Rng rng(step_stream_key(cfg, scale, epoch, step));
            std::vector<Slot> slots;
            slots.reserve(static_cast<std::size_t>(cfg.batch_size));
            for (int b = 0; b < cfg.batch_size; ++b)
                slots.push_back(make_slot(data, scale, margin, cfg, gen, rng));

            // Discriminator step: real and fake passes, fake detached.
            std::fill(g_disc.begin(), g_disc.end(), 0.0f);
            double loss_d = 0.0;
            for (Slot& s : slots) {
                Trace<float> tr_real, tr_fake;
                const Tensor<float> real_in = concat_channels(s.cond, s.target);
                const Tensor<float> fake_in = concat_channels(s.cond, s.fake);
                const Tensor<float> d_real = net_forward(disc, real_in, &tr_real);
                const Tensor<float> d_fake = net_forward(disc, fake_in, &tr_fake);
                DLossGrad<float> dl = d_loss_grad(d_real, d_fake);
                loss_d += dl.loss;
                net_backward(disc, tr_real, dl.g_real, g_disc.data());
                net_backward(disc, tr_fake, dl.g_fake, g_disc.data());
            }
            const float inv_batch = 1.0f / static_cast<float>(cfg.batch_size);
            for (float& g : g_disc) g *= inv_batch;
            adam_step(disc, disc_opt, g_disc.data(), cfg);
            loss_d /= cfg.batch_size;

            // Generator step against the updated discriminator.
            std::fill(g_gen.begin(), g_gen.end(), 0.0f);
            std::fill(g_scratch.begin(), g_scratch.end(), 0.0f);
            double loss_g = 0.0;
            for (Slot& s : slots) {
                Trace<float> tr;
                const Tensor<float> fake_in = concat_channels(s.cond, s.fake);
                const Tensor<float> d_fake = net_forward(disc, fake_in, &tr);
                GLossGrad<float> gl = g_loss_grad(d_fake);
                loss_g += gl.loss;
                const Tensor<float> gin_d = net_backward(disc, tr, gl.g_fake, g_scratch.data());
                Tensor<float> g_img(1, gin_d.sp);
                const float* src = gin_d.ch(cond_channels);
                std::copy(src, src + g_img.numel(), g_img.data.begin());
                if (cfg.pixel_loss_weight > 0.0) {
                    PixelLossGrad<float> pl = l1_loss_grad(s.fake, s.target);
                    loss_g += cfg.pixel_loss_weight * pl.loss;
                    const float w = static_cast<float>(cfg.pixel_loss_weight);
                    for (std::size_t i = 0; i < g_img.numel(); ++i)
                        g_img.data[i] += w * pl.g.data[i];
                }
                net_backward(gen, s.gtrace, g_img, g_gen.data());
            }
            for (float& g : g_gen) g *= inv_batch;
            adam_step(gen, gen_opt, g_gen.data(), cfg);
            loss_g /= cfg.batch_size;

            epoch_d += loss_d;
            epoch_g += loss_g;
            if (stats) stats->push_back({epoch + 1, loss_d, loss_g});
        }
        if (log) {
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            char row[160];
            std::snprintf(row, sizeof row, "%d,%.10g,%.10g,%.3f\n", epoch + 1, epoch_d / steps,
                          epoch_g / steps, secs);
            *log << row;
        }
    }

    Checkpoint out;
    out.scale = scale;
    out.epoch = cfg.epochs;
    out.cfg_hash = cfg_h;
    out.gen = std::move(gen);
    out.disc = std::move(disc);
    out.gen_opt = std::move(gen_opt);
    out.disc_opt = std::move(disc_opt);
    return out;
}

std::vector<Checkpoint> train_all(const TrainSet& data, const TrainConfig& cfg,
                                  const std::string& out_dir) {
    validate_config(cfg);
    const DataShape shape = check_dataset(data);
    std::filesystem::create_directories(out_dir);
    std::vector<Checkpoint> out;
    for (int scale = 0; scale <= shape.n_scales; ++scale) {
        const std::string ck_path =
            out_dir + "/checkpoint_scale" + std::to_string(scale) + ".msgan";
        const std::string log_path = out_dir + "/train_scale" + std::to_string(scale) + ".csv";
        if (std::filesystem::exists(ck_path)) {
            Checkpoint have = load_checkpoint(ck_path);
            if (have.cfg_hash != config_hash(cfg))
                throw std::runtime_error("train_all: " + ck_path +
                                         " was trained with a different configuration; delete "
                                         "it to retrain this scale");
            if (have.scale != scale)
                throw std::runtime_error("train_all: " + ck_path + " holds scale " +
                                         std::to_string(have.scale));
            if (have.epoch >= cfg.epochs) {
                out.push_back(std::move(have));
                continue;
            }
            std::ofstream log(log_path, std::ios::app);
            Checkpoint done = train_scale(data, scale, cfg, &log, nullptr, &have);
            save_checkpoint(done, ck_path);
            out.push_back(std::move(done));
            continue;
        }
        std::ofstream log(log_path, std::ios::trunc);
        if (!log) throw std::runtime_error("train_all: cannot open log " + log_path);
        log << "epoch,loss_d,loss_g,seconds\n";
        Checkpoint done = train_scale(data, scale, cfg, &log, nullptr, nullptr);
        save_checkpoint(done, ck_path);
        out.push_back(std::move(done));
    }
    return out;
}

}  // namespace msgan
