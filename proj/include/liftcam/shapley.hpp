#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "liftcam/attribution.hpp"
#include "liftcam/network.hpp"

namespace liftcam {

/// Exact enumeration visits 2^N_l coalitions; refuse anything larger.
inline constexpr std::size_t kExactShapleyMaxPlayers = 20;

/// Orderings are drawn without replacement while N_l! stays below this.
inline constexpr std::uint64_t kDistinctOrderingBound = 3628800;  // 10!

class OracleCapExceeded : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Value of a coalition given as a presence mask (1 = player present).
using CoalitionValue = std::function<double(std::span<const std::uint8_t>)>;

/// A sampled set Π of permutations of {0..n-1}.
struct OrderingSet {
    std::vector<std::vector<std::size_t>> orderings;
    std::uint64_t seed = 0;

    std::size_t size() const noexcept { return orderings.size(); }

    /// Uniform orderings from a seeded generator; distinct when n! ≤ kDistinctOrderingBound
    /// and count ≤ n!, otherwise drawn with replacement.
    static OrderingSet sample(std::size_t n, std::size_t count, std::uint64_t seed);
    /// Every permutation in lexicographic order (n ≤ 10).
    static OrderingSet all(std::size_t n);
    /// The single ordering (0, 1, …, n−1).
    static OrderingSet identity(std::size_t n);
};

/// Shapley values by full subset enumeration with weights |S|!(n−|S|−1)!/n!.
std::vector<double> exact_shapley_values(std::size_t players, const CoalitionValue& value);

/// Permutation estimator: average marginal contribution along each ordering.
/// Coalition values are memoised so repeated prefixes are evaluated once.
std::vector<double> ordering_shapley_values(std::size_t players, const CoalitionValue& value,
                                            const OrderingSet& orderings, std::size_t* evaluations = nullptr);

/// The channel game v(a') = F^c(h_A(a')).
CoalitionValue channel_game(const ModelGraph& model, const Tensor& activations, std::size_t cls);

CoefficientVector exact_shapley(const ModelGraph& model, const Tensor& activations, std::size_t cls);

/// Monte-Carlo SHAP-CAM over the given orderings.
CoefficientVector shap_cam(const ModelGraph& model, const Tensor& activations, std::size_t cls,
                           const OrderingSet& orderings);

}  // namespace liftcam
