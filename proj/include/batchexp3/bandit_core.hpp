#pragma once

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchexp3 {

/// Discrete set of bids in integer cents, strictly increasing.
class BidSpace
{
public:
    explicit BidSpace(std::vector<int> cents) : cents_(std::move(cents))
    {
        if (cents_.size() < 2)
            throw std::invalid_argument("bid space needs at least two bids");
        for (std::size_t i = 0; i < cents_.size(); ++i) {
            if (cents_[i] < 1)
                throw std::invalid_argument("bids must be at least 1 cent");
            if (i > 0 && cents_[i] <= cents_[i - 1])
                throw std::invalid_argument("bids must be strictly increasing");
        }
    }

    /// The 14-bid grid used in production: step 2 up to 17 cents, coarser above.
    static BidSpace standard() { return BidSpace({1, 3, 5, 7, 9, 11, 13, 15, 17, 20, 25, 30, 35, 40}); }

    std::size_t size() const noexcept { return cents_.size(); }
    int operator[](std::size_t i) const { return cents_.at(i); }
    const std::vector<int>& cents() const noexcept { return cents_; }

    std::optional<std::size_t> index_of(int cents) const
    {
        auto it = std::lower_bound(cents_.begin(), cents_.end(), cents);
        if (it == cents_.end() || *it != cents)
            return std::nullopt;
        return static_cast<std::size_t>(it - cents_.begin());
    }

    friend bool operator==(const BidSpace&, const BidSpace&) = default;

private:
    std::vector<int> cents_;
};

/// Cumulative scores, one row per item, one column per bid.
struct ScoreTable
{
    std::size_t items = 0;
    std::size_t bids = 0;
    std::vector<double> values;
    std::uint64_t round = 0;

    ScoreTable() = default;
    ScoreTable(std::size_t n, std::size_t b) : items(n), bids(b), values(n * b, 0.0) {}

    std::span<double> row(std::size_t item) { return {values.data() + item * bids, bids}; }
    std::span<const double> row(std::size_t item) const { return {values.data() + item * bids, bids}; }

    bool all_finite() const
    {
        return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const ScoreTable&, const ScoreTable&) = default;
};

struct PolicyMatrix
{
    std::size_t items = 0;
    std::size_t bids = 0;
    std::vector<double> probs;
    double eta = 0.0;

    std::span<const double> row(std::size_t item) const { return {probs.data() + item * bids, bids}; }
    std::span<double> row(std::size_t item) { return {probs.data() + item * bids, bids}; }

    friend bool operator==(const PolicyMatrix&, const PolicyMatrix&) = default;
};

struct PlacedBid
{
    std::uint64_t round = 0;
    std::size_t item = 0;
    std::size_t bid_index = 0;
    double sampling_prob = 0.0; // policy entry at draw time, never recomputed

    friend bool operator==(const PlacedBid&, const PlacedBid&) = default;
};

struct Learner
{
    ScoreTable scores;
    PolicyMatrix policy;
};

inline void validate_eta(double eta)
{
    if (!(eta > 0.0) || !std::isfinite(eta))
        throw std::invalid_argument("learning rate must be positive and finite");
}

/// Writes softmax(eta * scores) into out, stabilised by subtracting the row maximum.
inline void compute_policy_into(std::span<const double> scores, double eta, std::span<double> out)
{
    if (scores.empty() || out.size() != scores.size())
        throw std::invalid_argument("policy row size mismatch");
    for (double s : scores)
        if (!std::isfinite(s))
            throw std::invalid_argument("non-finite score");
    const double top = *std::max_element(scores.begin(), scores.end());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp(eta * (scores[i] - top));
        total += out[i];
    }
    for (double& p : out)
        p /= total;
}

inline std::vector<double> compute_policy(std::span<const double> scores, double eta)
{
    std::vector<double> out(scores.size());
    compute_policy_into(scores, eta, out);
    return out;
}

inline PolicyMatrix policy_from_scores(const ScoreTable& scores, double eta)
{
    validate_eta(eta);
    PolicyMatrix policy{scores.items, scores.bids, std::vector<double>(scores.values.size()), eta};
    for (std::size_t j = 0; j < scores.items; ++j)
        compute_policy_into(scores.row(j), eta, policy.row(j));
    return policy;
}

inline Learner init_learner(const BidSpace& bid_space, double eta, std::size_t items)
{
    validate_eta(eta);
    if (items < 1)
        throw std::invalid_argument("need at least one item");
    ScoreTable scores(items, bid_space.size());
    PolicyMatrix policy = policy_from_scores(scores, eta);
    return {std::move(scores), std::move(policy)};
}

/// Inverse-CDF draw: first index whose cumulative mass exceeds u.
inline std::size_t sample_index(std::span<const double> probs, double u)
{
    double cumulative = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (probs[i] > 0.0)
            last_positive = i;
        cumulative += probs[i];
        if (u < cumulative)
            return i;
    }
    return last_positive;
}

/// Draws one bid for item j from streams[j] (one uniform per item).
inline PlacedBid sample_bid(const PolicyMatrix& policy, std::uint64_t round, std::size_t item, Stream& stream)
{
    const auto row = policy.row(item);
    const std::size_t index = sample_index(row, stream.uniform());
    return {round, item, index, row[index]};
}

inline std::vector<PlacedBid> sample_bids(const PolicyMatrix& policy, std::uint64_t round,
                                          std::span<Stream> streams)
{
    if (streams.size() != policy.items)
        throw std::invalid_argument("one random stream per item is required");
    std::vector<PlacedBid> placed;
    placed.reserve(policy.items);
    for (std::size_t j = 0; j < policy.items; ++j)
        placed.push_back(sample_bid(policy, round, j, streams[j]));
    return placed;
}

/// Score increment for one bid after one observed round: 1 for bids that were
/// not placed, 1 - (1 - r) / pi for the placed one.
inline double incremental_score_gain(bool placed, double reward, double sampling_prob)
{
    if (!(sampling_prob > 0.0) || sampling_prob > 1.0)
        throw std::invalid_argument("sampling probability must be in (0, 1]");
    if (!placed)
        return 1.0;
    return 1.0 - (1.0 - reward) / sampling_prob;
}

struct ReleasedReward
{
    PlacedBid placed;
    double reward = 0.0; // item's own normalized reward in [0, 1]
};

/// Delayed importance-weighted batch update. Records are applied in
/// ascending (round, item) order. Throws before touching the table if any
/// record is invalid.
inline void apply_batch_update(ScoreTable& scores, std::span<const ReleasedReward> released)
{
    for (const auto& r : released) {
        if (!(r.reward >= 0.0 && r.reward <= 1.0))
            throw std::invalid_argument("reward outside [0, 1]; was it normalized? (round " +
                                        std::to_string(r.placed.round) + ", item " +
                                        std::to_string(r.placed.item) + ")");
        if (!(r.placed.sampling_prob > 0.0) || r.placed.sampling_prob > 1.0)
            throw std::invalid_argument("sampling probability must be in (0, 1]");
        if (r.placed.item >= scores.items || r.placed.bid_index >= scores.bids)
            throw std::out_of_range("released record does not fit the score table");
    }

    std::vector<const ReleasedReward*> order;
    order.reserve(released.size());
    for (const auto& r : released)
        order.push_back(&r);
    std::stable_sort(order.begin(), order.end(), [](const ReleasedReward* a, const ReleasedReward* b) {
        if (a->placed.round != b->placed.round)
            return a->placed.round < b->placed.round;
        return a->placed.item < b->placed.item;
    });

    for (const ReleasedReward* r : order) {
        auto row = scores.row(r->placed.item);
        for (std::size_t i = 0; i < row.size(); ++i)
            row[i] += incremental_score_gain(i == r->placed.bid_index, r->reward, r->placed.sampling_prob);
    }
}

/// sqrt(log|B| / (T |B|)), the rate under which the regret bound holds.
inline double theorem_learning_rate(std::size_t bids, std::uint64_t horizon)
{
    if (bids < 2 || horizon < 1)
        throw std::invalid_argument("theorem rate needs |B| >= 2 and T >= 1");
    const double b = static_cast<double>(bids);
    return std::sqrt(std::log(b) / (static_cast<double>(horizon) * b));
}

} // namespace batchexp3
