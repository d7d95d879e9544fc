#include "drift/errors.hpp"
#include "drift/fs.hpp"
#include "drift/hashing.hpp"
#include "drift/trainer/trainer.hpp"

#include <fmt/format.h>

#include <cstring>
#include <fstream>
#include <iterator>

namespace drift::trainer {
namespace {

constexpr char kMagic[8] = {'D', 'R', 'I', 'F', 'T', 'C', 'K', 'P'};
constexpr std::size_t kDigestSize = 64;  // hex SHA-256 trailer

template <typename T>
void put(std::string& out, const T& v) {
    out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
public:
    Reader(const std::string& data, std::size_t end) : data_(data), end_(end) {}

    template <typename T>
    T get() {
        T v;
        std::memcpy(&v, take(sizeof(T)), sizeof(T));
        return v;
    }
    std::string get_string(std::size_t n) { return {take(n), n}; }
    const char* take(std::size_t n) {
        if (n > end_ - pos_) throw IntegrityError("checkpoint is truncated");
        const char* p = data_.data() + pos_;
        pos_ += n;
        return p;
    }
    bool done() const { return pos_ == end_; }

private:
    const std::string& data_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const ModelState& state, const TrainConfig& cfg, const std::filesystem::path& path) {
    const auto& enc = *state.encoder;
    nlohmann::json meta = {{"schema_version", kCheckpointVersion},
                           {"backbone", enc.backbone_config()},
                           {"backbone_hash", enc.backbone().content_hash()},
                           {"train_config", cfg},
                           {"class_names", state.class_names},
                           {"class_captions", state.class_captions}};
    const std::string meta_text = meta.dump();

    std::string out(kMagic, sizeof kMagic);
    put(out, kCheckpointVersion);
    put(out, static_cast<std::uint64_t>(meta_text.size()));
    out += meta_text;
    const auto params = enc.trainable_parameters();
    put(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        put(out, static_cast<std::uint32_t>(p.name.size()));
        out += p.name;
        const auto& v = p.var.value();
        put(out, static_cast<std::int64_t>(v.rows()));
        put(out, static_cast<std::int64_t>(v.cols()));
        out.append(reinterpret_cast<const char*>(v.data()), sizeof(double) * static_cast<std::size_t>(v.size()));
    }
    out += sha256_hex(out);

    ensure_directory(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot write checkpoint {}", path.string()));
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError(fmt::format("failed writing checkpoint {}", path.string()));
}

namespace {

struct RawCheckpoint {
    nlohmann::json meta;
    std::vector<std::pair<std::string, ag::Matrix>> tensors;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError(fmt::format("cannot open checkpoint {}", path.string()));
    const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (data.size() < sizeof kMagic + kDigestSize || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0) {
        throw IntegrityError(fmt::format("{} is not a checkpoint or is truncated", path.string()));
    }
    const std::size_t body = data.size() - kDigestSize;
    if (sha256_hex(std::string_view(data).substr(0, body)) != data.substr(body)) {
        throw IntegrityError(fmt::format("{} failed its integrity check (truncated or corrupted)", path.string()));
    }

    Reader r(data, body);
    r.take(sizeof kMagic);
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw VersionError(fmt::format("checkpoint schema version {} but this build reads version {}", version,
                                       kCheckpointVersion));
    }
    RawCheckpoint raw;
    const auto meta_len = r.get<std::uint64_t>();
    try {
        raw.meta = nlohmann::json::parse(r.get_string(meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError(fmt::format("checkpoint metadata unreadable: {}", e.what()));
    }
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.get_string(r.get<std::uint32_t>());
        const auto rows = r.get<std::int64_t>();
        const auto cols = r.get<std::int64_t>();
        if (rows < 0 || cols < 0) throw IntegrityError(fmt::format("tensor '{}' has a negative shape", name));
        ag::Matrix m(rows, cols);
        const auto bytes = sizeof(double) * static_cast<std::size_t>(rows * cols);
        std::memcpy(m.data(), r.take(bytes), bytes);
        raw.tensors.emplace_back(std::move(name), std::move(m));
    }
    if (!r.done()) throw IntegrityError("checkpoint has trailing bytes");
    return raw;
}

LoadedCheckpoint restore(const RawCheckpoint& raw, std::shared_ptr<const model::FrozenBackbone> backbone) {
    LoadedCheckpoint out;
    out.config = raw.meta.at("train_config").get<TrainConfig>();
    out.state.class_names = raw.meta.at("class_names").get<std::vector<std::string>>();
    out.state.class_captions = raw.meta.at("class_captions").get<std::vector<std::string>>();
    out.state.tau = out.config.weights.tau;
    out.state.encoder = std::make_shared<model::DualEncoder>(backbone, out.config.adaptation, out.config.seed);

    const auto params = out.state.encoder->trainable_parameters();
    if (params.size() != raw.tensors.size()) {
        throw DimensionError(fmt::format("checkpoint holds {} tensors, model expects {}", raw.tensors.size(),
                                         params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, value] = raw.tensors[i];
        auto var = params[i].var;
        if (name != params[i].name) {
            throw DimensionError(fmt::format("checkpoint tensor '{}' where model expects '{}'", name, params[i].name));
        }
        if (value.rows() != var.rows() || value.cols() != var.cols()) {
            throw DimensionError(fmt::format("tensor '{}' is {}x{} in the checkpoint but {}x{} in the model", name,
                                             value.rows(), value.cols(), var.rows(), var.cols()));
        }
        var.mutable_value() = value;
    }
    const auto stored_hash = raw.meta.at("backbone_hash").get<std::string>();
    if (stored_hash != backbone->content_hash()) {
        throw CompatibilityError(fmt::format("checkpoint was trained on backbone {} but {} was supplied",
                                             stored_hash.substr(0, 12), backbone->content_hash().substr(0, 12)));
    }
    return out;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const auto raw = read_raw(path);
    auto cfg = raw.meta.at("backbone").get<model::BackboneConfig>();
    return restore(raw, std::make_shared<const model::FrozenBackbone>(cfg));
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::shared_ptr<const model::FrozenBackbone> backbone) {
    return restore(read_raw(path), std::move(backbone));
}

}  // namespace drift::trainer
