#include "liftcam/shapley.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <unordered_map>

namespace liftcam {

namespace {

// Unbiased integer in [0, bound) by rejection; independent of the standard
// library's distribution implementations so orderings replay across toolchains.
std::size_t uniform_below(std::mt19937_64& rng, std::size_t bound) {
    const std::uint64_t b = bound;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % b;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<std::size_t>(draw % b);
}

template <typename T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) std::swap(items[i - 1], items[uniform_below(rng, i)]);
}

std::vector<std::size_t> iota_vector(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

// n! when it does not exceed `cap`, otherwise 0.
std::uint64_t bounded_factorial(std::size_t n, std::uint64_t cap) {
    std::uint64_t f = 1;
    for (std::size_t i = 2; i <= n; ++i) {
        f *= i;
        if (f > cap) return 0;
    }
    return f;
}

}  // namespace

OrderingSet OrderingSet::all(std::size_t n) {
    if (n > 10) throw OracleCapExceeded("refusing to enumerate " + std::to_string(n) + "! orderings");
    OrderingSet set;
    auto perm = iota_vector(n);
    do {
        set.orderings.push_back(perm);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return set;
}

OrderingSet OrderingSet::identity(std::size_t n) {
    OrderingSet set;
    set.orderings.push_back(iota_vector(n));
    return set;
}

OrderingSet OrderingSet::sample(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count == 0) throw std::invalid_argument("ordering set must contain at least one ordering");
    OrderingSet set;
    set.seed = seed;
    std::mt19937_64 rng(seed);
    const std::uint64_t total = bounded_factorial(n, kDistinctOrderingBound);
    const bool distinct = total != 0 && count <= total;
    if (distinct && count * 2 > total) {
        // Dense request: shuffle the full list and keep a prefix.
        auto everything = all(n).orderings;
        fisher_yates(everything, rng);
        everything.resize(count);
        set.orderings = std::move(everything);
        return set;
    }
    std::set<std::vector<std::size_t>> seen;
    while (set.orderings.size() < count) {
        auto perm = iota_vector(n);
        fisher_yates(perm, rng);
        if (distinct && !seen.insert(perm).second) continue;
        set.orderings.push_back(std::move(perm));
    }
    return set;
}

std::vector<double> exact_shapley_values(std::size_t players, const CoalitionValue& value) {
    if (players > kExactShapleyMaxPlayers) {
        throw OracleCapExceeded("exact Shapley enumeration over " + std::to_string(players) + " channels needs 2^" +
                                std::to_string(players) + " head evaluations; the cap is " +
                                std::to_string(kExactShapleyMaxPlayers) + " channels");
    }
    const std::size_t subsets = std::size_t{1} << players;
    std::vector<double> v(subsets);
    std::vector<std::uint8_t> mask(players);
    for (std::size_t s = 0; s < subsets; ++s) {
        for (std::size_t k = 0; k < players; ++k) mask[k] = static_cast<std::uint8_t>((s >> k) & 1u);
        v[s] = value(mask);
    }
    // weight[m] = m!(n−m−1)!/n! for a coalition of size m not containing the player.
    std::vector<double> weight(players, 0.0);
    for (std::size_t m = 0; m < players; ++m) {
        weight[m] = std::exp(std::lgamma(static_cast<double>(m) + 1.0) +
                             std::lgamma(static_cast<double>(players - m)) -
                             std::lgamma(static_cast<double>(players) + 1.0));
    }
    std::vector<double> phi(players, 0.0);
    for (std::size_t k = 0; k < players; ++k) {
        const std::size_t bit = std::size_t{1} << k;
        double acc = 0.0;
        for (std::size_t s = 0; s < subsets; ++s) {
            if (s & bit) continue;
            acc += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        }
        phi[k] = acc;
    }
    return phi;
}

std::vector<double> ordering_shapley_values(std::size_t players, const CoalitionValue& value,
                                            const OrderingSet& orderings, std::size_t* evaluations) {
    if (orderings.orderings.empty()) throw std::invalid_argument("ordering set is empty");
    std::unordered_map<std::string, double> memo;
    std::string key(players, '\0');
    auto evaluate = [&]() {
        auto [it, inserted] = memo.try_emplace(key, 0.0);
        if (inserted) {
            it->second = value(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(key.data()),
                                                             key.size()));
        }
        return it->second;
    };
    std::vector<double> alpha(players, 0.0);
    for (const auto& pi : orderings.orderings) {
        if (pi.size() != players) {
            throw std::invalid_argument("ordering of length " + std::to_string(pi.size()) + " for " +
                                        std::to_string(players) + " channels");
        }
        std::fill(key.begin(), key.end(), '\0');
        double previous = evaluate();
        for (std::size_t k : pi) {
            if (k >= players || key[k]) throw std::invalid_argument("ordering is not a permutation");
            key[k] = 1;
            const double current = evaluate();
            alpha[k] += current - previous;
            previous = current;
        }
    }
    for (double& a : alpha) a /= static_cast<double>(orderings.size());
    if (evaluations) *evaluations = memo.size();
    return alpha;
}

CoalitionValue channel_game(const ModelGraph& model, const Tensor& activations, std::size_t cls) {
    if (cls >= model.num_classes()) {
        throw ShapeError("class " + std::to_string(cls) + " out of range [0, " + std::to_string(model.num_classes()) +
                         ")");
    }
    return [&model, &activations, cls](std::span<const std::uint8_t> mask) {
        return forward_head_logits(model, mask_apply(activations, mask))[cls];
    };
}

CoefficientVector exact_shapley(const ModelGraph& model, const Tensor& activations, std::size_t cls) {
    const std::size_t n = activations.dim(0);
    if (n > kExactShapleyMaxPlayers) {
        throw OracleCapExceeded("exact Shapley enumeration over " + std::to_string(n) +
                                " channels needs 2^" + std::to_string(n) + " head evaluations; the cap is " +
                                std::to_string(kExactShapleyMaxPlayers) + " channels");
    }
    return {"exact-shapley", exact_shapley_values(n, channel_game(model, activations, cls))};
}

CoefficientVector shap_cam(const ModelGraph& model, const Tensor& activations, std::size_t cls,
                           const OrderingSet& orderings) {
    return {"shap-cam", ordering_shapley_values(activations.dim(0), channel_game(model, activations, cls), orderings)};
}

}  // namespace liftcam
