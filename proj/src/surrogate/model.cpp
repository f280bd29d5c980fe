#include "episurr/surrogate/model.hpp"

#include "episurr/common/error.hpp"
#include "episurr/epi/compartments.hpp"

#include <string>

namespace episurr::surrogate {

std::string_view layer_kind_name(LayerKind k)
{
    switch (k) {
    case LayerKind::dense:
        return "dense";
    case LayerKind::gcn_conv:
        return "gcn_conv";
    case LayerKind::arma_conv:
        return "arma_conv";
    }
    return "?";
}

LayerKind layer_kind_from_name(std::string_view s)
{
    if (s == "dense") return LayerKind::dense;
    if (s == "gcn_conv") return LayerKind::gcn_conv;
    if (s == "arma_conv") return LayerKind::arma_conv;
    throw InvalidArgument("unknown layer kind '" + std::string(s) + "'");
}

std::string_view activation_name(Activation a)
{
    switch (a) {
    case Activation::relu:
        return "relu";
    case Activation::elu:
        return "elu";
    case Activation::linear:
        return "linear";
    }
    return "?";
}

Activation activation_from_name(std::string_view s)
{
    if (s == "relu") return Activation::relu;
    if (s == "elu") return Activation::elu;
    if (s == "linear") return Activation::linear;
    throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

std::size_t ModelSpec::output_horizon() const { return output_width / epi::kCompartments; }

void ModelSpec::validate() const
{
    if (input_width == 0) throw InvalidArgument("input_width must be positive");
    if (output_width == 0 || output_width % epi::kCompartments != 0) {
        throw InvalidArgument("output_width must be a positive multiple of 48");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        const std::string where = "layers[" + std::to_string(i) + "]";
        if (l.channels == 0) throw InvalidArgument(where + ".channels must be positive");
        if (l.kind == LayerKind::arma_conv && (l.stacks == 0 || l.iterations == 0)) {
            throw InvalidArgument(where + ": ARMA stacks and iterations must be at least 1");
        }
        if (!spatial && l.kind != LayerKind::dense) {
            throw InvalidArgument(where + ": graph layers need a spatial model");
        }
    }
}

nlohmann::json to_json(const LayerSpec& s)
{
    nlohmann::json j{{"kind", layer_kind_name(s.kind)}, {"channels", s.channels}, {"activation", activation_name(s.activation)}};
    if (s.kind == LayerKind::arma_conv) {
        j["stacks"] = s.stacks;
        j["iterations"] = s.iterations;
    }
    return j;
}

LayerSpec layer_spec_from_json(const nlohmann::json& j)
{
    LayerSpec s;
    s.kind = layer_kind_from_name(j.at("kind").get<std::string>());
    s.channels = j.at("channels").get<std::size_t>();
    s.activation = activation_from_name(j.value("activation", std::string("relu")));
    s.stacks = j.value("stacks", std::size_t{1});
    s.iterations = j.value("iterations", std::size_t{1});
    return s;
}

nlohmann::json to_json(const ModelSpec& s)
{
    auto layers = nlohmann::json::array();
    for (const auto& l : s.layers) layers.push_back(to_json(l));
    return {{"layers", layers}, {"input_width", s.input_width}, {"output_width", s.output_width}, {"spatial", s.spatial}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j)
{
    ModelSpec s;
    for (const auto& l : j.at("layers")) s.layers.push_back(layer_spec_from_json(l));
    s.input_width = j.at("input_width").get<std::size_t>();
    s.output_width = j.at("output_width").get<std::size_t>();
    s.spatial = j.value("spatial", true);
    s.validate();
    return s;
}

std::vector<LayerSpec> arma_stack(std::size_t n, std::size_t channels, Activation act, std::size_t stacks,
                                  std::size_t iterations)
{
    return std::vector<LayerSpec>(n, LayerSpec{LayerKind::arma_conv, channels, act, stacks, iterations});
}

template <class T>
GraphOperators<T> GraphOperators<T>::from_adjacency(const metapop::BinaryMatrix& a)
{
    GraphOperators g;
    g.with_self_loops = metapop::normalize_with_self_loops(a).cast<T>();
    g.normalized = metapop::normalize_adjacency(a).cast<T>();
    g.nodes = a.n;
    return g;
}

namespace {

template <class T>
Var activate(Tape<T>& t, Var x, Activation a)
{
    switch (a) {
    case Activation::relu:
        return t.relu(x);
    case Activation::elu:
        return t.elu(x);
    case Activation::linear:
        break;
    }
    return x;
}

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

template <class T>
void check_input(const ModelSpec& spec, Eigen::Index rows, Eigen::Index cols, const GraphOperators<T>* graph,
                 std::size_t blocks)
{
    if (static_cast<std::size_t>(cols) != spec.input_width) {
        throw EncodingMismatchError("input has " + std::to_string(cols) + " columns, model expects " +
                                    std::to_string(spec.input_width));
    }
    if (spec.spatial) {
        if (graph == nullptr) throw InvalidArgument("spatial model needs graph operators");
        if (static_cast<std::size_t>(rows) != blocks * graph->nodes) {
            throw EncodingMismatchError("input has " + std::to_string(rows) + " rows, expected " +
                                        std::to_string(blocks) + " x " + std::to_string(graph->nodes) + " nodes");
        }
    }
}

template <class T>
void activate_inplace(Matrix<T>& x, Activation a)
{
    if (a == Activation::relu) {
        x = x.cwiseMax(T(0));
    }
    else if (a == Activation::elu) {
        x = (x.array() >= T(0)).select(x.array(), x.array().exp() - T(1));
    }
}

} // namespace

template <class T>
std::size_t Network<T>::add_param(std::string name, Matrix<T> value)
{
    params_.emplace_back(std::move(name), std::move(value));
    return params_.size() - 1;
}

template <class T>
Network<T>::Network(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec))
{
    spec_.validate();
    Rng rng(seed);
    std::size_t in = spec_.input_width;
    const auto glorot = [&](std::size_t r, std::size_t c) { return autodiff::glorot_uniform<T>(r, c, rng); };
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
        const auto& ls = spec_.layers[i];
        const std::string prefix = "layer" + std::to_string(i);
        Layer layer{ls, in, {}};
        const std::size_t out = ls.channels;
        if (ls.kind == LayerKind::arma_conv) {
            for (std::size_t k = 0; k < ls.stacks; ++k) {
                const std::string sp = prefix + ".stack" + std::to_string(k);
                layer.params.push_back(add_param(sp + ".w_in", glorot(in, out)));
                layer.params.push_back(ls.iterations > 1 ? add_param(sp + ".w_rec", glorot(out, out)) : kNone);
                layer.params.push_back(add_param(sp + ".v", glorot(in, out)));
                layer.params.push_back(add_param(sp + ".b", Matrix<T>::Zero(1, out)));
            }
        }
        else {
            layer.params.push_back(add_param(prefix + ".w", glorot(in, out)));
            layer.params.push_back(add_param(prefix + ".b", Matrix<T>::Zero(1, out)));
        }
        layers_.push_back(std::move(layer));
        in = out;
    }
    Layer head{LayerSpec{LayerKind::dense, spec_.output_width, Activation::linear, 1, 1}, in, {}};
    head.params.push_back(add_param("head.w", glorot(in, spec_.output_width)));
    head.params.push_back(add_param("head.b", Matrix<T>::Zero(1, spec_.output_width)));
    layers_.push_back(std::move(head));
}

template <class T>
Var Network<T>::forward(Tape<T>& t, Var x, const GraphOperators<T>* graph, std::size_t blocks) const
{
    const auto& X = t.value(x);
    check_input(spec_, X.rows(), X.cols(), graph, blocks);
    Var h = x;
    for (const auto& layer : layers_) {
        const auto& ls = layer.spec;
        const auto& p = layer.params;
        switch (ls.kind) {
        case LayerKind::dense:
            h = activate(t, t.add_bias(t.matmul(h, t.parameter(param(p[0]))), t.parameter(param(p[1]))), ls.activation);
            break;
        case LayerKind::gcn_conv: {
            const Var xw = t.matmul(h, t.parameter(param(p[0])));
            h = activate(t, t.add_bias(t.sp_matmul(graph->with_self_loops, xw, blocks), t.parameter(param(p[1]))),
                         ls.activation);
            break;
        }
        case LayerKind::arma_conv: {
            const Var x0 = h;
            Var sum{};
            for (std::size_t k = 0; k < ls.stacks; ++k) {
                const std::size_t* sp = p.data() + 4 * k;
                const Var skip = t.matmul(x0, t.parameter(param(sp[2])));
                Var xt = x0;
                for (std::size_t it = 0; it < ls.iterations; ++it) {
                    const Var w = t.parameter(param(it == 0 ? sp[0] : sp[1]));
                    const Var prop = t.sp_matmul(graph->normalized, t.matmul(xt, w), blocks);
                    xt = activate(t, t.add_bias(t.add(prop, skip), t.parameter(param(sp[3]))), ls.activation);
                }
                sum = k == 0 ? xt : t.add(sum, xt);
            }
            h = ls.stacks == 1 ? sum : t.scale(sum, T(1) / static_cast<T>(ls.stacks));
            break;
        }
        }
    }
    return h;
}

template <class T>
Matrix<T> Network<T>::predict(const Matrix<T>& x, const GraphOperators<T>* graph, std::size_t blocks) const
{
    // Same arithmetic as forward() without recording a tape.
    check_input(spec_, x.rows(), x.cols(), graph, blocks);
    const auto affine = [](const Matrix<T>& in, const Parameter<T>& w, const Parameter<T>& b) {
        Matrix<T> out(in.rows(), w.value.cols());
        out.noalias() = in * w.value;
        out.rowwise() += b.value.row(0);
        return out;
    };
    Matrix<T> h = x;
    for (const auto& layer : layers_) {
        const auto& ls = layer.spec;
        const auto& p = layer.params;
        switch (ls.kind) {
        case LayerKind::dense:
            h = affine(h, param(p[0]), param(p[1]));
            break;
        case LayerKind::gcn_conv: {
            Matrix<T> xw(h.rows(), param(p[0]).value.cols());
            xw.noalias() = h * param(p[0]).value;
            h = autodiff::sp_matmul(graph->with_self_loops, xw, blocks);
            h.rowwise() += param(p[1]).value.row(0);
            break;
        }
        case LayerKind::arma_conv: {
            Matrix<T> sum = Matrix<T>::Zero(h.rows(), static_cast<Eigen::Index>(ls.channels));
            Matrix<T> xw(h.rows(), static_cast<Eigen::Index>(ls.channels));
            for (std::size_t k = 0; k < ls.stacks; ++k) {
                const std::size_t* sp = p.data() + 4 * k;
                const Matrix<T> skip = affine(h, param(sp[2]), param(sp[3]));
                Matrix<T> xt = h;
                for (std::size_t it = 0; it < ls.iterations; ++it) {
                    xw.noalias() = xt * param(it == 0 ? sp[0] : sp[1]).value;
                    xt = autodiff::sp_matmul(graph->normalized, xw, blocks);
                    xt += skip;
                    activate_inplace(xt, ls.activation);
                }
                sum += xt;
            }
            if (ls.stacks > 1) sum *= T(1) / static_cast<T>(ls.stacks);
            h = std::move(sum);
            continue;
        }
        }
        activate_inplace(h, ls.activation);
    }
    return h;
}

template <class T>
std::vector<Parameter<T>*> Network<T>::parameters()
{
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

template <class T>
std::vector<const Parameter<T>*> Network<T>::parameters() const
{
    std::vector<const Parameter<T>*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
}

template <class T>
std::size_t Network<T>::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
}

template <class T>
template <class U>
Network<U> Network<T>::cast() const
{
    Network<U> out(spec_, 0);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        out.params_[i].value = params_[i].value.template cast<U>();
        out.params_[i].zero_grad();
    }
    return out;
}

template class Network<float>;
template class Network<double>;
template struct GraphOperators<float>;
template struct GraphOperators<double>;
template Network<double> Network<float>::cast<double>() const;
template Network<float> Network<double>::cast<float>() const;
template Network<float> Network<float>::cast<float>() const;
template Network<double> Network<double>::cast<double>() const;

} // namespace episurr::surrogate
