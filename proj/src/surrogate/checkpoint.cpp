#include "episurr/surrogate/checkpoint.hpp"

#include "episurr/common/error.hpp"
#include "episurr/epi/compartments.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace episurr::surrogate {

nlohmann::json to_json(const TrainingMeta& m)
{
    return {{"seed", m.seed},
            {"epochs", m.epochs},
            {"best_epoch", m.best_epoch},
            {"best_val_mape", m.best_val_mape},
            {"train_seconds", m.train_seconds},
            {"train_samples", m.train_samples},
            {"val_samples", m.val_samples}};
}

TrainingMeta training_meta_from_json(const nlohmann::json& j)
{
    TrainingMeta m;
    m.seed = j.value("seed", m.seed);
    m.epochs = j.value("epochs", m.epochs);
    m.best_epoch = j.value("best_epoch", m.best_epoch);
    m.best_val_mape = j.value("best_val_mape", m.best_val_mape);
    m.train_seconds = j.value("train_seconds", m.train_seconds);
    m.train_samples = j.value("train_samples", m.train_samples);
    m.val_samples = j.value("val_samples", m.val_samples);
    return m;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v)
{
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

bool read_exact(std::istream& in, std::vector<unsigned char>& buf, std::size_t n)
{
    buf.resize(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(in.gcount()) == n;
}

} // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt)
{
    const auto params = ckpt.network.parameters();
    auto tensors = nlohmann::json::array();
    for (const auto* p : params) tensors.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
    const nlohmann::json header{{"version", kCheckpointVersion},
                                {"spec", to_json(ckpt.network.spec())},
                                {"meta", to_json(ckpt.meta)},
                                {"data", ckpt.data},
                                {"tensors", tensors}};
    const std::string h = header.dump();
    out.write("EGC1", 4);
    put_u32(out, static_cast<std::uint32_t>(h.size()));
    out.write(h.data(), static_cast<std::streamsize>(h.size()));
    for (const auto* p : params) {
        for (Eigen::Index i = 0; i < p->value.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(p->value.data()[i]));
    }
    if (!out) throw IoError("failed to write checkpoint");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_checkpoint(out, ckpt);
}

Checkpoint read_checkpoint(std::istream& in)
{
    std::vector<unsigned char> buf;
    if (!read_exact(in, buf, 4) || std::memcmp(buf.data(), "EGC1", 4) != 0) {
        throw CorruptFileError("not a checkpoint (bad magic)");
    }
    if (!read_exact(in, buf, 4)) throw CorruptFileError("truncated checkpoint header");
    const std::uint32_t len = get_u32(buf.data());
    if (!read_exact(in, buf, len)) throw CorruptFileError("truncated checkpoint header");
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(buf.begin(), buf.end());
    }
    catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }
    const auto version = header.value("version", 0u);
    if (version != kCheckpointVersion) {
        throw VersionMismatchError("checkpoint version " + std::to_string(version) + ", expected " +
                                   std::to_string(kCheckpointVersion));
    }
    std::optional<Network<float>> net;
    try {
        net.emplace(model_spec_from_json(header.at("spec")), 0);
    }
    catch (const nlohmann::json::exception& e) {
        throw CorruptFileError(std::string("bad model spec: ") + e.what());
    }
    catch (const InvalidArgument& e) {
        throw CorruptFileError(std::string("bad model spec: ") + e.what());
    }
    const auto params = net->parameters();
    const auto& tensors = header.at("tensors");
    if (tensors.size() != params.size()) throw CorruptFileError("tensor count does not match the model spec");
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& p = *params[k];
        const auto& t = tensors[k];
        if (t.value("name", "") != p.name || t.value("rows", -1) != p.value.rows() || t.value("cols", -1) != p.value.cols()) {
            throw CorruptFileError("tensor " + std::to_string(k) + " does not match the model spec");
        }
        const auto n = static_cast<std::size_t>(p.value.size());
        if (!read_exact(in, buf, 4 * n)) throw CorruptFileError("checkpoint truncated in tensor " + p.name);
        for (std::size_t i = 0; i < n; ++i) p.value.data()[i] = std::bit_cast<float>(get_u32(buf.data() + 4 * i));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw CorruptFileError("trailing bytes after the last tensor");
    Checkpoint ckpt{std::move(*net), training_meta_from_json(header.value("meta", nlohmann::json::object())),
                    header.value("data", nlohmann::json::object())};
    return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_checkpoint(in);
}

Surrogate::Surrogate(Checkpoint ckpt, const metapop::BinaryMatrix* adjacency) : ckpt_(std::move(ckpt))
{
    const auto& spec = ckpt_.network.spec();
    if (spec.spatial) {
        if (adjacency == nullptr) throw InvalidArgument("spatial checkpoint needs a graph");
        graph_ = GraphOperators<float>::from_adjacency(*adjacency);
        nodes_ = adjacency->n;
        rows_per_sample_ = nodes_;
        if (ckpt_.data.contains("nodes") && ckpt_.data.at("nodes").get<std::size_t>() != nodes_) {
            throw EncodingMismatchError("checkpoint was trained on " + ckpt_.data.at("nodes").dump() +
                                        " nodes, graph has " + std::to_string(nodes_));
        }
    }
}

namespace {

// max(expm1(y), 0). Below 0.5 a degree-7 Taylor polynomial keeps full float precision,
// above it exp(y) - 1 loses nothing. Chunks go through an aligned buffer so Eigen never
// peels a scalar head, which would make results depend on the address of `out`.
void clamped_expm1(const float* y, float* out, std::size_t n)
{
    constexpr std::size_t chunk = 256;
    alignas(64) float buf[chunk];
    for (std::size_t at = 0; at < n; at += chunk) {
        const auto len = static_cast<Eigen::Index>(std::min(chunk, n - at));
        const auto x = Eigen::Map<const Eigen::ArrayXf>(y + at, len).max(0.0f);
        auto o = Eigen::Map<Eigen::ArrayXf, Eigen::Aligned64>(buf, len);
        const auto poly =
            x * (1.0f + x * (1.0f / 2 + x * (1.0f / 6 + x * (1.0f / 24 + x * (1.0f / 120 + x * (1.0f / 720 + x * (1.0f / 5040)))))));
        // 1 below 0.5, else 0; Eigen 3.4 has no vectorized select.
        const auto below = ((0.5f - x) * 1e30f).max(0.0f).min(1.0f);
        o = x.exp() - 1.0f;
        o = below * poly + (1.0f - below) * o;
        std::copy_n(buf, len, out + at);
    }
}

} // namespace

void decode_counts(std::span<const float> y, std::span<float> out)
{
    if (out.size() != y.size()) throw ShapeError("decode_counts: size mismatch");
    clamped_expm1(y.data(), out.data(), y.size());
}

Matrix<float> Surrogate::forward_raw(std::span<const std::span<const float>> features) const
{
    const auto& spec = ckpt_.network.spec();
    const std::size_t per = rows_per_sample_ * spec.input_width;
    Matrix<float> x(static_cast<Eigen::Index>(features.size() * rows_per_sample_),
                    static_cast<Eigen::Index>(spec.input_width));
    for (std::size_t s = 0; s < features.size(); ++s) {
        if (features[s].size() != per) {
            throw EncodingMismatchError("sample has " + std::to_string(features[s].size()) + " feature values, model expects " +
                                        std::to_string(per));
        }
        std::memcpy(x.data() + s * per, features[s].data(), sizeof(float) * per);
    }
    return ckpt_.network.predict(x, graph_ ? &*graph_ : nullptr, features.size());
}

std::vector<std::vector<float>> Surrogate::predict_batch(std::span<const std::span<const float>> features,
                                                         std::size_t horizon) const
{
    if (horizon == 0 || horizon > max_horizon()) {
        throw InvalidArgument("horizon " + std::to_string(horizon) + " outside 1.." + std::to_string(max_horizon()));
    }
    const Matrix<float> raw = forward_raw(features);
    const std::size_t cols = static_cast<std::size_t>(raw.cols());
    const std::size_t rows = rows_per_sample_;
    constexpr std::size_t K = epi::kCompartments;
    // Blocks of days keep the decoded columns in cache while they are appended in
    // day, node, compartment order.
    constexpr std::size_t days_per_block = 8;
    std::vector<float> counts(rows * days_per_block * K);
    std::vector<std::vector<float>> out(features.size());
    for (std::size_t s = 0; s < features.size(); ++s) {
        auto& o = out[s];
        o.reserve(horizon * rows * K);
        const float* block = raw.data() + s * rows * cols;
        for (std::size_t d0 = 0; d0 < horizon; d0 += days_per_block) {
            const std::size_t w = std::min(days_per_block, horizon - d0) * K;
            for (std::size_t i = 0; i < rows; ++i) clamped_expm1(block + i * cols + d0 * K, counts.data() + i * w, w);
            for (std::size_t d = 0; d < w; d += K) {
                for (std::size_t i = 0; i < rows; ++i) {
                    const float* src = counts.data() + i * w + d;
                    o.insert(o.end(), src, src + K);
                }
            }
        }
    }
    return out;
}

std::vector<float> Surrogate::predict(std::span<const float> features, std::size_t horizon) const
{
    const std::span<const float> one[] = {features};
    return std::move(predict_batch(one, horizon).front());
}

} // namespace episurr::surrogate
