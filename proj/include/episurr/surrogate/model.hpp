#pragma once

#include "episurr/autodiff/tape.hpp"
#include "episurr/metapop/graph.hpp"

#include <nlohmann/json.hpp>

#include <deque>
#include <string_view>
#include <vector>

namespace episurr::surrogate {

using autodiff::Matrix;
using autodiff::Parameter;
using autodiff::Tape;
using autodiff::Var;

enum class LayerKind { dense, gcn_conv, arma_conv };
enum class Activation { relu, elu, linear };

std::string_view layer_kind_name(LayerKind k);
LayerKind layer_kind_from_name(std::string_view s);
std::string_view activation_name(Activation a);
Activation activation_from_name(std::string_view s);

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t channels = 64;
    Activation activation = Activation::relu;
    /// ARMA only: parallel stacks K and recurrent iterations T.
    std::size_t stacks = 1;
    std::size_t iterations = 1;

    bool operator==(const LayerSpec&) const = default;
};

/// Hidden layers followed by an implicit linear head of width `output_width`.
struct ModelSpec {
    std::vector<LayerSpec> layers;
    /// Per node for spatial models, flattened input for non-spatial ones.
    std::size_t input_width = 0;
    /// horizon * 48, per node or flattened like the input.
    std::size_t output_width = 0;
    bool spatial = true;

    std::size_t output_horizon() const;
    /// Throws InvalidArgument for zero widths, K or T < 1, or graph layers in a
    /// non-spatial model.
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

nlohmann::json to_json(const LayerSpec& s);
LayerSpec layer_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& s);
ModelSpec model_spec_from_json(const nlohmann::json& j);

/// n stacked ARMA layers with `channels` channels each.
std::vector<LayerSpec> arma_stack(std::size_t n, std::size_t channels, Activation act = Activation::elu,
                                  std::size_t stacks = 2, std::size_t iterations = 1);

/// Both normalised adjacency forms of one graph.
template <class T>
struct GraphOperators {
    /// D~^-1/2 (A + I) D~^-1/2 for gcn_conv.
    CsrMatrix<T> with_self_loops;
    /// D^-1/2 A D^-1/2 for arma_conv.
    CsrMatrix<T> normalized;
    std::size_t nodes = 0;

    static GraphOperators from_adjacency(const metapop::BinaryMatrix& a);
};

/// Feed-forward stack of dense, GCN and ARMA layers with a linear head. Inputs are
/// `blocks` samples stacked row-wise, each with graph.nodes rows (spatial) or one row.
template <class T>
class Network {
public:
    Network(ModelSpec spec, std::uint64_t seed);

    const ModelSpec& spec() const { return spec_; }

    Var forward(Tape<T>& tape, Var x, const GraphOperators<T>* graph, std::size_t blocks) const;

    /// Forward pass without keeping a recording for training.
    Matrix<T> predict(const Matrix<T>& x, const GraphOperators<T>* graph, std::size_t blocks) const;

    std::vector<Parameter<T>*> parameters();
    std::vector<const Parameter<T>*> parameters() const;
    std::size_t parameter_count() const;

    /// Same architecture with every value converted to U.
    template <class U>
    Network<U> cast() const;

private:
    template <class>
    friend class Network;

    struct Layer {
        LayerSpec spec;
        std::size_t in = 0;
        // dense / gcn: {w, b}. arma: per stack {w_in, w_rec?, v, b}.
        std::vector<std::size_t> params;
    };

    Parameter<T>& param(std::size_t i) const { return params_[i]; }
    std::size_t add_param(std::string name, Matrix<T> value);

    ModelSpec spec_;
    std::vector<Layer> layers_;
    mutable std::deque<Parameter<T>> params_;
};

extern template class Network<float>;
extern template class Network<double>;
extern template struct GraphOperators<float>;
extern template struct GraphOperators<double>;

} // namespace episurr::surrogate
