#include "episurr/surrogate/train.hpp"

#include "episurr/common/error.hpp"
#include "episurr/common/parallel.hpp"
#include "episurr/epi/compartments.hpp"
#include "episurr/scenario/encoding.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <ostream>

namespace episurr::surrogate {

using epi::kCompartments;

nlohmann::json to_json(const TrainConfig& c)
{
    return {{"max_epochs", c.max_epochs},
            {"patience", c.patience},
            {"batch_size", c.batch_size},
            {"optimizer", c.optimizer == Optimizer::adam ? "adam" : "sgd"},
            {"lr", c.adam.lr},
            {"beta1", c.adam.beta1},
            {"beta2", c.adam.beta2},
            {"eps", c.adam.eps},
            {"sgd_lr", c.sgd_lr},
            {"seed", c.seed}};
}

TrainConfig train_config_from_json(const nlohmann::json& j)
{
    TrainConfig c;
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    c.batch_size = j.value("batch_size", c.batch_size);
    const auto opt = j.value("optimizer", std::string("adam"));
    if (opt == "adam") c.optimizer = Optimizer::adam;
    else if (opt == "sgd") c.optimizer = Optimizer::sgd;
    else throw InvalidArgument("unknown optimizer '" + opt + "'");
    c.adam.lr = j.value("lr", c.adam.lr);
    c.adam.beta1 = j.value("beta1", c.adam.beta1);
    c.adam.beta2 = j.value("beta2", c.adam.beta2);
    c.adam.eps = j.value("eps", c.adam.eps);
    c.sgd_lr = j.value("sgd_lr", c.sgd_lr);
    c.seed = j.value("seed", c.seed);
    if (c.batch_size == 0) throw InvalidArgument("batch_size must be positive");
    return c;
}

ModelSpec model_spec_for(const scenario::Dataset& dataset, std::vector<LayerSpec> layers)
{
    ModelSpec s;
    s.layers = std::move(layers);
    s.spatial = dataset.config.spatial;
    s.input_width = s.spatial ? scenario::kSpatialWidth : scenario::kInputDays * scenario::kNonSpatialWidth;
    s.output_width = dataset.shape.horizon * kCompartments;
    s.validate();
    return s;
}

metapop::BinaryMatrix dataset_adjacency(const scenario::Dataset& dataset)
{
    if (!dataset.config.spatial) throw InvalidArgument("non-spatial dataset has no graph");
    return metapop::build_graph(dataset.config.graph).adjacency();
}

namespace {

/// Row blocks of every sample: features, log1p targets and original targets.
struct Tensors {
    std::size_t rows_per_sample = 1;
    Matrix<float> x;
    Matrix<float> y_log;
    Matrix<float> y;
};

Tensors prepare(const scenario::Dataset& ds, const ModelSpec& spec)
{
    Tensors t;
    t.rows_per_sample = spec.spatial ? ds.shape.nodes : 1;
    const std::size_t rps = t.rows_per_sample;
    if (spec.spatial != ds.config.spatial || ds.shape.feature_size() != rps * spec.input_width) {
        throw EncodingMismatchError("model input width " + std::to_string(spec.input_width) +
                                    " does not match the dataset features");
    }
    const std::size_t horizon = spec.output_horizon();
    if (horizon > ds.shape.horizon) {
        throw EncodingMismatchError("model predicts " + std::to_string(horizon) + " days, dataset has " +
                                    std::to_string(ds.shape.horizon));
    }
    const auto n = static_cast<Eigen::Index>(ds.records.size() * rps);
    t.x.resize(n, static_cast<Eigen::Index>(spec.input_width));
    t.y.resize(n, static_cast<Eigen::Index>(spec.output_width));
    for (std::size_t s = 0; s < ds.records.size(); ++s) {
        const auto& rec = ds.records[s];
        std::memcpy(t.x.data() + s * rps * spec.input_width, rec.features.data(), sizeof(float) * rec.features.size());
        for (std::size_t d = 0; d < horizon; ++d) {
            for (std::size_t i = 0; i < rps; ++i) {
                std::memcpy(t.y.data() + (s * rps + i) * spec.output_width + d * kCompartments,
                            rec.labels.data() + (d * rps + i) * kCompartments, sizeof(float) * kCompartments);
            }
        }
    }
    t.y_log = t.y.array().log1p();
    return t;
}

Matrix<float> gather(const Matrix<float>& m, std::size_t rps, std::span<const std::size_t> samples)
{
    Matrix<float> out(static_cast<Eigen::Index>(samples.size() * rps), m.cols());
    const std::size_t block = rps * static_cast<std::size_t>(m.cols());
    for (std::size_t k = 0; k < samples.size(); ++k) {
        std::memcpy(out.data() + k * block, m.data() + samples[k] * block, sizeof(float) * block);
    }
    return out;
}

struct MapeSum {
    double sum = 0.0;
    std::size_t used = 0;

    void add(const autodiff::MapeResult& r)
    {
        sum += r.value * static_cast<double>(r.used);
        used += r.used;
    }
    double value() const { return used ? sum / static_cast<double>(used) : std::numeric_limits<double>::quiet_NaN(); }
};

double original_scale_mape(const Network<float>& net, const GraphOperators<float>* graph, const Tensors& t,
                           std::span<const std::size_t> idx, std::size_t batch)
{
    MapeSum acc;
    for (std::size_t b = 0; b < idx.size(); b += batch) {
        const auto chunk = idx.subspan(b, std::min(batch, idx.size() - b));
        const Matrix<float> pred = net.predict(gather(t.x, t.rows_per_sample, chunk), graph, chunk.size());
        const Matrix<float> counts = pred.array().expm1().max(0.0f);
        const Matrix<float> target = gather(t.y, t.rows_per_sample, chunk);
        acc.add(autodiff::mape(counts.data(), target.data(), static_cast<std::size_t>(target.size())));
    }
    return acc.value();
}

} // namespace

Checkpoint train(const scenario::Dataset& dataset, std::span<const std::size_t> train_idx,
                 std::span<const std::size_t> val_idx, const ModelSpec& spec, const TrainConfig& config)
{
    if (train_idx.empty()) throw InvalidArgument("training split is empty");
    if (val_idx.empty()) throw InvalidArgument("validation split is empty");
    if (config.batch_size == 0) throw InvalidArgument("batch_size must be positive");
    for (auto i : train_idx) {
        if (i >= dataset.records.size()) throw InvalidArgument("training index out of range");
    }
    for (auto i : val_idx) {
        if (i >= dataset.records.size()) throw InvalidArgument("validation index out of range");
    }
    const auto start = std::chrono::steady_clock::now();
    const Tensors data = prepare(dataset, spec);
    std::optional<GraphOperators<float>> graph;
    if (spec.spatial) graph = GraphOperators<float>::from_adjacency(dataset_adjacency(dataset));
    const GraphOperators<float>* g = graph ? &*graph : nullptr;

    Network<float> net(spec, config.seed);
    const auto params = net.parameters();
    // Start the readout at the mean log target so early epochs fit deviations only.
    params.back()->value = gather(data.y_log, data.rows_per_sample, train_idx).colwise().mean();
    autodiff::Adam<float> adam(params, config.adam);

    std::vector<Matrix<float>> best;
    for (const auto* p : params) best.push_back(p->value);
    double best_mape = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;
    std::size_t epoch = 0;

    std::vector<std::size_t> order(train_idx.begin(), train_idx.end());
    for (epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const auto epoch_start = std::chrono::steady_clock::now();
        Rng rng(mix_seed(config.seed, epoch));
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[rng.below(k)]);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            const auto chunk = std::span<const std::size_t>(order).subspan(b, std::min(config.batch_size, order.size() - b));
            Tape<float> tape;
            const Var out = net.forward(tape, tape.constant(gather(data.x, data.rows_per_sample, chunk)), g, chunk.size());
            const Var loss = tape.mape_loss(out, gather(data.y_log, data.rows_per_sample, chunk));
            const double value = tape.value(loss)(0, 0);
            if (!std::isfinite(value)) {
                throw DivergenceError("non-finite training loss in epoch " + std::to_string(epoch));
            }
            adam.zero_grad();
            tape.backward(loss);
            if (config.optimizer == Optimizer::adam) adam.step();
            else autodiff::sgd_step<float>(params, static_cast<float>(config.sgd_lr));
            loss_sum += value;
            ++batches;
        }

        const double val = original_scale_mape(net, g, data, val_idx, config.batch_size);
        const bool improved = val < best_mape;
        if (improved) {
            best_mape = val;
            best_epoch = epoch;
            since_best = 0;
            for (std::size_t k = 0; k < params.size(); ++k) best[k] = params[k]->value;
        }
        else {
            ++since_best;
        }
        if (config.on_epoch) {
            config.on_epoch(EpochLog{epoch, loss_sum / static_cast<double>(batches), val, improved,
                                     std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_start).count()});
        }
        if (since_best > config.patience) break;
    }
    for (std::size_t k = 0; k < params.size(); ++k) params[k]->value = best[k];

    Checkpoint ckpt{std::move(net), {}, {}};
    ckpt.meta.seed = config.seed;
    ckpt.meta.epochs = std::min(epoch, config.max_epochs);
    ckpt.meta.best_epoch = best_epoch;
    ckpt.meta.best_val_mape = best_mape;
    ckpt.meta.train_samples = train_idx.size();
    ckpt.meta.val_samples = val_idx.size();
    ckpt.meta.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    ckpt.data = {{"regime", scenario::regime_name(dataset.config.regime)},
                 {"horizon", spec.output_horizon()},
                 {"spatial", spec.spatial},
                 {"nodes", dataset.shape.nodes}};
    if (spec.spatial) ckpt.data["graph"] = metapop::to_json(dataset.config.graph);
    return ckpt;
}

double evaluate_mape(const Surrogate& model, const scenario::Dataset& dataset, std::span<const std::size_t> idx)
{
    const std::size_t horizon = std::min(model.max_horizon(), dataset.shape.horizon);
    MapeSum acc;
    constexpr std::size_t batch = 32;
    for (std::size_t b = 0; b < idx.size(); b += batch) {
        const auto chunk = idx.subspan(b, std::min(batch, idx.size() - b));
        std::vector<std::span<const float>> feats;
        for (auto i : chunk) feats.emplace_back(dataset.records.at(i).features);
        const auto preds = model.predict_batch(feats, horizon);
        for (std::size_t k = 0; k < chunk.size(); ++k) {
            acc.add(autodiff::mape(preds[k].data(), dataset.records[chunk[k]].labels.data(), preds[k].size()));
        }
    }
    return acc.value();
}

std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> k_folds(std::span<const std::size_t> idx,
                                                                                    std::size_t k)
{
    if (k < 2 || k > idx.size()) throw InvalidArgument("k must lie in [2, number of samples]");
    std::vector<std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> folds(k);
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t lo = idx.size() * f / k;
        const std::size_t hi = idx.size() * (f + 1) / k;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            (i >= lo && i < hi ? folds[f].second : folds[f].first).push_back(idx[i]);
        }
    }
    return folds;
}

std::vector<GridResult> grid_search(const std::vector<GridConfig>& space, const scenario::Dataset& dataset,
                                    std::span<const std::size_t> train_idx, std::size_t k, std::size_t threads)
{
    if (space.empty()) throw InvalidArgument("grid search space is empty");
    const auto folds = k_folds(train_idx, k);
    struct Cell {
        double mape = 0.0;
        double seconds = 0.0;
        std::string error;
    };
    std::vector<Cell> cells(space.size() * k);
    parallel_for(cells.size(), threads, [&](std::size_t c) {
        const auto& cfg = space[c / k];
        const auto& fold = folds[c % k];
        const auto t0 = std::chrono::steady_clock::now();
        try {
            TrainConfig tc = cfg.train;
            tc.on_epoch = nullptr;
            const auto ckpt = train(dataset, fold.first, fold.second, model_spec_for(dataset, cfg.layers), tc);
            cells[c].mape = ckpt.meta.best_val_mape;
        }
        catch (const std::exception& e) {
            cells[c].error = e.what();
        }
        cells[c].seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    std::vector<GridResult> results;
    for (std::size_t i = 0; i < space.size(); ++i) {
        GridResult r;
        r.config = space[i];
        for (std::size_t f = 0; f < k; ++f) {
            const auto& cell = cells[i * k + f];
            r.train_seconds += cell.seconds;
            if (!cell.error.empty()) {
                r.failed = true;
                if (r.error.empty()) r.error = cell.error;
                continue;
            }
            r.fold_mape.push_back(cell.mape);
        }
        if (!r.failed) {
            const double n = static_cast<double>(r.fold_mape.size());
            r.mean_mape = std::accumulate(r.fold_mape.begin(), r.fold_mape.end(), 0.0) / n;
            double ss = 0.0;
            for (double m : r.fold_mape) ss += (m - r.mean_mape) * (m - r.mean_mape);
            r.std_mape = n > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
        }
        results.push_back(std::move(r));
    }
    std::stable_sort(results.begin(), results.end(), [](const GridResult& a, const GridResult& b) {
        if (a.failed != b.failed) return !a.failed;
        if (a.mean_mape != b.mean_mape) return a.mean_mape < b.mean_mape;
        return a.config.name < b.config.name;
    });
    return results;
}

namespace {

std::string describe_layers(const std::vector<LayerSpec>& layers)
{
    std::string s;
    for (const auto& l : layers) {
        if (!s.empty()) s += '|';
        s += std::string(layer_kind_name(l.kind)) + ":" + std::to_string(l.channels) + ":" +
             std::string(activation_name(l.activation));
        if (l.kind == LayerKind::arma_conv) s += ":K" + std::to_string(l.stacks) + "T" + std::to_string(l.iterations);
    }
    return s.empty() ? "none" : s;
}

std::string csv_escape(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

} // namespace

void write_grid_csv(std::ostream& out, const std::vector<GridResult>& results)
{
    out << "rank,name,layers,optimizer,lr,mean_mape,std_mape,train_seconds,status\n";
    std::size_t rank = 1;
    for (const auto& r : results) {
        const bool adam = r.config.train.optimizer == Optimizer::adam;
        out << rank++ << ',' << csv_escape(r.config.name) << ',' << describe_layers(r.config.layers) << ','
            << (adam ? "adam" : "sgd") << ',' << (adam ? r.config.train.adam.lr : r.config.train.sgd_lr) << ',';
        if (r.failed) out << ",,";
        else out << r.mean_mape << ',' << r.std_mape << ',';
        out << r.train_seconds << ',' << (r.failed ? csv_escape("failed: " + r.error) : "ok") << '\n';
    }
}

std::vector<GridConfig> default_grid(std::size_t max_layers, const std::vector<std::size_t>& channels, LayerKind kind,
                                     const TrainConfig& base)
{
    std::vector<GridConfig> out;
    out.push_back({"linear", {}, base});
    for (std::size_t n = 1; n <= max_layers; ++n) {
        for (std::size_t c : channels) {
            LayerSpec l{kind, c, Activation::elu, kind == LayerKind::arma_conv ? std::size_t{2} : std::size_t{1}, 1};
            out.push_back({std::string(layer_kind_name(kind)) + "-" + std::to_string(n) + "x" + std::to_string(c),
                           std::vector<LayerSpec>(n, l), base});
        }
    }
    return out;
}

} // namespace episurr::surrogate
