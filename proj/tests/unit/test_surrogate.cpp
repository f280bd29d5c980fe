#include "episurr/common/error.hpp"
#include "episurr/surrogate/checkpoint.hpp"
#include "episurr/scenario/encoding.hpp"
#include "episurr/surrogate/train.hpp"
#include "network_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace episurr;
using namespace episurr::surrogate;

namespace {

template <class T>
void set_param(Network<T>& net, const std::string& name, const Matrix<T>& value)
{
    for (auto* p : net.parameters()) {
        if (p->name == name) {
            REQUIRE(p->value.rows() == value.rows());
            REQUIRE(p->value.cols() == value.cols());
            p->value = value;
            return;
        }
    }
    FAIL("no parameter " << name);
}

Matrix<double> random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng)
{
    Matrix<double> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
    return m;
}

metapop::BinaryMatrix random_graph(std::size_t n, double p, Rng& rng)
{
    metapop::BinaryMatrix a(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rng.uniform() < p) a(i, j) = a(j, i) = 1;
        }
    }
    return a;
}

ModelSpec spec_with(std::vector<LayerSpec> layers, std::size_t in, std::size_t horizon = 1)
{
    ModelSpec s;
    s.layers = std::move(layers);
    s.input_width = in;
    s.output_width = horizon * 48;
    return s;
}

/// Head set to the identity on the first channels so the hidden output can be read back.
void identity_head(Network<double>& net, std::size_t channels)
{
    Matrix<double> w = Matrix<double>::Zero(static_cast<Eigen::Index>(channels), 48);
    for (std::size_t c = 0; c < channels; ++c) w(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = 1.0;
    set_param(net, "head.w", w);
}

/// Non-spatial dataset whose labels are all `value`.
scenario::Dataset constant_dataset(std::size_t n, float value, std::uint64_t seed)
{
    scenario::Dataset ds;
    ds.config.spatial = false;
    ds.config.horizon = 30;
    ds.shape = {1, scenario::kInputDays, scenario::kNonSpatialWidth, 30};
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        scenario::Record r;
        r.features.resize(ds.shape.feature_size());
        for (auto& f : r.features) f = static_cast<float>(rng.uniform(0.0, 0.01));
        r.labels.assign(ds.shape.label_size(), value);
        r.meta = {{"index", i}, {"change_points", nlohmann::json::array()}};
        ds.records.push_back(std::move(r));
    }
    return ds;
}

std::vector<std::size_t> iota(std::size_t lo, std::size_t hi)
{
    std::vector<std::size_t> v(hi - lo);
    std::iota(v.begin(), v.end(), lo);
    return v;
}

} // namespace

TEST_CASE("spec validation and json")
{
    auto s = spec_with(arma_stack(2, 8), 10, 2);
    CHECK(s.output_horizon() == 2);
    CHECK(model_spec_from_json(to_json(s)) == s);
    s.spatial = false;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s = spec_with({LayerSpec{LayerKind::dense, 0}}, 10);
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    s = spec_with({}, 10);
    s.output_width = 50;
    CHECK_THROWS_AS(s.validate(), InvalidArgument);
    CHECK_THROWS_AS(layer_kind_from_name("lstm"), InvalidArgument);
}

TEST_CASE("gcn layer on special graphs")
{
    Rng rng(3);
    const auto spec = spec_with({LayerSpec{LayerKind::gcn_conv, 4, Activation::relu}}, 3);
    Network<double> net(spec, 1);
    identity_head(net, 4);
    const Matrix<double> w = random_matrix(3, 4, rng);
    set_param(net, "layer0.w", w);
    const Matrix<double> x = random_matrix(2, 3, rng);

    // Without edges the propagation matrix is the identity.
    auto ops = GraphOperators<double>::from_adjacency(metapop::BinaryMatrix(2));
    Matrix<double> out = net.predict(x, &ops, 1);
    CHECK((out.leftCols(4) - (x * w).cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-14);

    // Two connected nodes average their features.
    metapop::BinaryMatrix path(2);
    path(0, 1) = path(1, 0) = 1;
    ops = GraphOperators<double>::from_adjacency(path);
    out = net.predict(x, &ops, 1);
    const Matrix<double> mean = (0.5 * (x.row(0) + x.row(1)) * w).cwiseMax(0.0);
    for (int i = 0; i < 2; ++i) CHECK((out.row(i).leftCols(4) - mean).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("arma layer on special graphs")
{
    Rng rng(4);
    const Matrix<double> x = random_matrix(3, 5, rng);
    const Matrix<double> w = random_matrix(5, 4, rng);
    const Matrix<double> v = random_matrix(5, 4, rng);

    SUBCASE("no edges leaves the skip term")
    {
        Network<double> net(spec_with({LayerSpec{LayerKind::arma_conv, 4, Activation::relu, 1, 1}}, 5), 1);
        identity_head(net, 4);
        set_param(net, "layer0.stack0.w_in", w);
        set_param(net, "layer0.stack0.v", v);
        const auto ops = GraphOperators<double>::from_adjacency(metapop::BinaryMatrix(3));
        CHECK((net.predict(x, &ops, 1).leftCols(4) - (x * v).cwiseMax(0.0)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("two equal stacks equal one")
    {
        Rng g(5);
        const auto a = random_graph(3, 0.8, g);
        const auto ops = GraphOperators<double>::from_adjacency(a);
        Network<double> one(spec_with({LayerSpec{LayerKind::arma_conv, 4, Activation::elu, 1, 1}}, 5), 1);
        Network<double> two(spec_with({LayerSpec{LayerKind::arma_conv, 4, Activation::elu, 2, 1}}, 5), 1);
        for (auto* net : {&one, &two}) identity_head(*net, 4);
        for (const char* k : {"0", "1"}) {
            const std::string sp = std::string("layer0.stack") + k;
            set_param(two, sp + ".w_in", w);
            set_param(two, sp + ".v", v);
        }
        set_param(one, "layer0.stack0.w_in", w);
        set_param(one, "layer0.stack0.v", v);
        CHECK((one.predict(x, &ops, 1) - two.predict(x, &ops, 1)).cwiseAbs().maxCoeff() < 1e-14);
    }
    SUBCASE("identity propagation without skip is a dense layer")
    {
        Network<double> arma(spec_with({LayerSpec{LayerKind::arma_conv, 4, Activation::relu, 1, 1}}, 5), 1);
        Network<double> dense(spec_with({LayerSpec{LayerKind::dense, 4, Activation::relu}}, 5), 1);
        for (auto* net : {&arma, &dense}) identity_head(*net, 4);
        set_param(arma, "layer0.stack0.w_in", w);
        set_param(arma, "layer0.stack0.v", Matrix<double>(Matrix<double>::Zero(5, 4)));
        set_param(dense, "layer0.w", w);
        GraphOperators<double> ops;
        ops.nodes = 3;
        ops.normalized.rows = ops.normalized.cols = 3;
        for (std::uint32_t i = 0; i < 3; ++i) {
            ops.normalized.col_idx.push_back(i);
            ops.normalized.values.push_back(1.0);
            ops.normalized.row_ptr.push_back(i + 1);
        }
        ops.with_self_loops = ops.normalized;
        CHECK((arma.predict(x, &ops, 1) - dense.predict(x, &ops, 1)).cwiseAbs().maxCoeff() < 1e-14);
    }
}

TEST_CASE("network matches the dense oracle")
{
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + rng.below(30);
        const auto a = random_graph(n, rng.uniform(0.0, 0.5), rng);
        std::vector<LayerSpec> layers;
        const auto depth = rng.below(4);
        for (std::size_t l = 0; l < depth; ++l) {
            const auto kind = static_cast<LayerKind>(rng.below(3));
            layers.push_back({kind, 2 + rng.below(6), static_cast<Activation>(rng.below(3)), 1 + rng.below(3),
                              1 + rng.below(3)});
        }
        Network<double> net(spec_with(layers, 3 + rng.below(5), 1 + rng.below(2)), rng.next_u64());
        for (auto* p : net.parameters()) p->value = random_matrix(p->value.rows(), p->value.cols(), rng);
        const auto ops = GraphOperators<double>::from_adjacency(a);
        const Matrix<double> x = random_matrix(static_cast<Eigen::Index>(2 * n), net.spec().input_width, rng);
        const Matrix<double> out = net.predict(x, &ops, 2);
        Tape<double> tape;
        const Matrix<double> taped = tape.value(net.forward(tape, tape.constant(x), &ops, 2));
        CHECK((taped - out).cwiseAbs().maxCoeff() < 1e-12);
        for (Eigen::Index b = 0; b < 2; ++b) {
            const auto rows = static_cast<Eigen::Index>(n);
            const Matrix<double> ref = testing::oracle_forward(net, x.middleRows(b * rows, rows), &a);
            CHECK((out.middleRows(b * rows, rows) - ref).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
}

TEST_CASE("network is permutation equivariant")
{
    Rng rng(12);
    const std::size_t n = 12;
    const auto a = random_graph(n, 0.3, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t k = n; k > 1; --k) std::swap(perm[k - 1], perm[rng.below(k)]);
    metapop::BinaryMatrix b(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) b(i, j) = a(perm[i], perm[j]);
    }
    Network<float> net(spec_with({{LayerKind::gcn_conv, 8, Activation::elu}, {LayerKind::arma_conv, 8, Activation::elu, 2, 2}}, 6), 3);
    Matrix<float> x = random_matrix(n, 6, rng).cast<float>();
    Matrix<float> xp(n, 6);
    for (std::size_t i = 0; i < n; ++i) xp.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(perm[i]));
    const auto oa = GraphOperators<float>::from_adjacency(a);
    const auto ob = GraphOperators<float>::from_adjacency(b);
    const Matrix<float> ya = net.predict(x, &oa, 1);
    const Matrix<float> yb = net.predict(xp, &ob, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto diff = (yb.row(static_cast<Eigen::Index>(i)) - ya.row(static_cast<Eigen::Index>(perm[i]))).cwiseAbs().maxCoeff();
        CHECK(diff < 1e-5f);
    }
}

TEST_CASE("zero weights predict zero counts")
{
    const auto a = random_graph(4, 0.5, *std::make_unique<Rng>(1));
    Network<float> net(spec_with(arma_stack(2, 4), scenario::kSpatialWidth, 2), 1);
    for (auto* p : net.parameters()) p->value.setZero();
    Checkpoint ckpt{net, {}, {{"nodes", 4}}};
    Surrogate s(ckpt, &a);
    const std::vector<float> features(4 * scenario::kSpatialWidth, 1.0f);
    const auto y = s.predict(features, 2);
    CHECK(y.size() == 2 * 4 * 48);
    CHECK(std::all_of(y.begin(), y.end(), [](float v) { return v == 0.0f; }));
    CHECK_THROWS_AS(s.predict(features, 3), InvalidArgument);
    CHECK_THROWS_AS(s.predict(std::vector<float>(10), 1), EncodingMismatchError);
    const auto other = random_graph(5, 0.5, *std::make_unique<Rng>(1));
    CHECK_THROWS_AS(Surrogate(ckpt, &other), EncodingMismatchError);
}

TEST_CASE("prediction slices the horizon and reorders by day")
{
    Rng rng(21);
    const auto a = random_graph(3, 0.7, rng);
    Network<float> net(spec_with({{LayerKind::gcn_conv, 4, Activation::elu}}, scenario::kSpatialWidth, 3), 2);
    const Surrogate s(Checkpoint{net, {}, {}}, &a);
    std::vector<float> features(3 * scenario::kSpatialWidth);
    for (auto& f : features) f = static_cast<float>(rng.uniform());
    const std::span<const float> one[] = {features};
    const Matrix<float> raw = s.forward_raw(one);
    const auto y = s.predict(features, 2);
    REQUIRE(y.size() == 2 * 3 * 48);
    for (std::size_t d = 0; d < 2; ++d) {
        for (std::size_t i = 0; i < 3; ++i) {
            for (std::size_t k = 0; k < 48; ++k) {
                const float expect = std::max(0.0f, std::expm1(raw(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d * 48 + k))));
                CHECK(y[(d * 3 + i) * 48 + k] == doctest::Approx(expect).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("decoded counts follow expm1")
{
    Rng rng(22);
    std::vector<float> y(200'000);
    for (auto& v : y) v = static_cast<float>(rng.uniform(-3.0, 16.0));
    y[0] = 0.0f;
    y[1] = 0.5f;
    y[2] = std::nextafter(0.5f, 0.0f);
    y[3] = 1e-30f;
    std::vector<float> out(y.size());
    decode_counts(y, out);
    double worst = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double expect = std::max(0.0, std::expm1(static_cast<double>(y[i])));
        if (expect == 0.0) {
            REQUIRE(out[i] == 0.0f);
            continue;
        }
        worst = std::max(worst, std::abs(out[i] - expect) / expect);
    }
    CHECK(worst < 1e-6);

    // Bitwise identical whatever the offsets of input and output.
    const std::span<const float> head(y.data(), 1000);
    std::vector<float> ref(head.size());
    decode_counts(head, ref);
    std::vector<float> in_buf(head.size() + 32), out_buf(head.size() + 32);
    for (std::size_t off = 1; off < 32; ++off) {
        std::copy(head.begin(), head.end(), in_buf.begin() + static_cast<std::ptrdiff_t>(off));
        const std::span<float> dst(out_buf.data() + (off * 7) % 32, head.size());
        decode_counts(std::span<const float>(in_buf.data() + off, head.size()), dst);
        CHECK(std::equal(ref.begin(), ref.end(), dst.begin()));
    }

    std::vector<float> short_out(3);
    CHECK_THROWS_AS(decode_counts(y, short_out), ShapeError);
}

TEST_CASE("checkpoint round trip")
{
    Network<float> net(spec_with(arma_stack(2, 6, Activation::elu, 2, 2), 7, 2), 9);
    Checkpoint ckpt{net, {}, {{"nodes", 5}, {"regime", "outbreak"}}};
    ckpt.meta.best_val_mape = 0.25;
    ckpt.meta.epochs = 17;
    std::stringstream buf;
    write_checkpoint(buf, ckpt);
    const std::string bytes = buf.str();

    std::stringstream in(bytes);
    const auto back = read_checkpoint(in);
    CHECK(back.network.spec() == ckpt.network.spec());
    CHECK(back.meta.epochs == 17);
    CHECK(back.meta.best_val_mape == 0.25);
    CHECK(back.data == ckpt.data);
    const auto pa = ckpt.network.parameters();
    const auto pb = back.network.parameters();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t k = 0; k < pa.size(); ++k) {
        CHECK(pa[k]->name == pb[k]->name);
        CHECK(std::memcmp(pa[k]->value.data(), pb[k]->value.data(), sizeof(float) * pa[k]->value.size()) == 0);
    }
    std::stringstream again;
    write_checkpoint(again, back);
    CHECK(again.str() == bytes);

    std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(read_checkpoint(truncated), CorruptFileError);
    std::stringstream trailing(bytes + "x");
    CHECK_THROWS_AS(read_checkpoint(trailing), CorruptFileError);
    std::stringstream magic("EGS1" + bytes.substr(4));
    CHECK_THROWS_AS(read_checkpoint(magic), CorruptFileError);

    std::string bumped = bytes;
    const auto pos = bumped.find("\"version\":1");
    REQUIRE(pos != std::string::npos);
    bumped[pos + 10] = '7';
    std::stringstream version(bumped);
    CHECK_THROWS_AS(read_checkpoint(version), VersionMismatchError);
}

TEST_CASE("training fits a constant target")
{
    const auto ds = constant_dataset(40, 100.0f, 5);
    TrainConfig cfg;
    cfg.max_epochs = 300;
    cfg.patience = 300;
    cfg.batch_size = 8;
    cfg.adam.lr = 3e-3;
    std::size_t logged = 0;
    cfg.on_epoch = [&](const EpochLog&) { ++logged; };
    const auto train_idx = iota(0, 32);
    const auto val_idx = iota(32, 40);
    const auto ckpt = train(ds, train_idx, val_idx, model_spec_for(ds, {{LayerKind::dense, 16, Activation::elu}}), cfg);
    CHECK(logged == 300);
    CHECK(ckpt.meta.epochs == 300);
    CHECK(ckpt.meta.best_val_mape < 5.0);
    const Surrogate s(ckpt, nullptr);
    CHECK(evaluate_mape(s, ds, val_idx) == doctest::Approx(ckpt.meta.best_val_mape).epsilon(1e-4));
    CHECK(ckpt.data.at("horizon") == 30);
}

TEST_CASE("early stopping and determinism")
{
    const auto ds = constant_dataset(20, 50.0f, 6);
    const auto train_idx = iota(0, 16);
    const auto val_idx = iota(16, 20);
    const auto spec = model_spec_for(ds, {{LayerKind::dense, 8, Activation::relu}});
    TrainConfig cfg;
    cfg.max_epochs = 50;
    cfg.patience = 0;
    cfg.sgd_lr = 10.0;
    cfg.optimizer = Optimizer::sgd;
    std::vector<EpochLog> logs;
    cfg.on_epoch = [&](const EpochLog& e) { logs.push_back(e); };
    try {
        const auto ckpt = train(ds, train_idx, val_idx, spec, cfg);
        REQUIRE(!logs.empty());
        CHECK(!logs.back().improved);
        CHECK(logs.size() == ckpt.meta.best_epoch + 1);
    }
    catch (const DivergenceError&) {
        CHECK(logs.size() <= 1);
    }

    TrainConfig det;
    det.max_epochs = 3;
    const auto a = train(ds, train_idx, val_idx, spec, det);
    const auto b = train(ds, train_idx, val_idx, spec, det);
    const auto pa = a.network.parameters();
    const auto pb = b.network.parameters();
    for (std::size_t k = 0; k < pa.size(); ++k) CHECK(pa[k]->value == pb[k]->value);
}

TEST_CASE("training input checks")
{
    const auto ds = constant_dataset(10, 1.0f, 7);
    const auto idx = iota(0, 8);
    const auto val = iota(8, 10);
    auto spec = model_spec_for(ds, {});
    spec.input_width = 12;
    CHECK_THROWS_AS(train(ds, idx, val, spec, {}), EncodingMismatchError);
    CHECK_THROWS_AS(train(ds, {}, val, model_spec_for(ds, {}), {}), InvalidArgument);
    const std::vector<std::size_t> bad{99};
    CHECK_THROWS_AS(train(ds, idx, bad, model_spec_for(ds, {}), {}), InvalidArgument);
    CHECK_THROWS_AS(dataset_adjacency(ds), InvalidArgument);
    CHECK(train_config_from_json(to_json(TrainConfig{})).adam.lr == 1e-3);
    CHECK_THROWS_AS(train_config_from_json({{"optimizer", "rmsprop"}}), InvalidArgument);
}

TEST_CASE("k folds partition the indices")
{
    const auto idx = iota(0, 10);
    const auto folds = k_folds(idx, 3);
    REQUIRE(folds.size() == 3);
    std::vector<int> seen(10, 0);
    for (const auto& [tr, va] : folds) {
        CHECK(tr.size() + va.size() == 10);
        for (auto i : va) ++seen[i];
    }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK_THROWS_AS(k_folds(idx, 1), InvalidArgument);
    CHECK_THROWS_AS(k_folds(idx, 11), InvalidArgument);
}

TEST_CASE("grid search")
{
    const auto ds = constant_dataset(12, 10.0f, 8);
    TrainConfig base;
    base.max_epochs = 2;
    auto space = default_grid(1, {4}, LayerKind::dense, base);
    REQUIRE(space.size() == 2);
    space.push_back({"broken", {{LayerKind::gcn_conv, 4}}, base});
    const auto results = grid_search(space, ds, iota(0, 12), 2);
    REQUIRE(results.size() == 3);
    CHECK(results[0].fold_mape.size() == 2);
    CHECK(!results[0].failed);
    CHECK(results[0].mean_mape <= results[1].mean_mape);
    CHECK(results[2].failed);
    CHECK(results[2].config.name == "broken");
    std::ostringstream csv;
    write_grid_csv(csv, results);
    const auto text = csv.str();
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.rfind("rank,name,layers", 0) == 0);
}
