#pragma once

#include "rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace batchexp3 {

enum class MechanismKind { second_price, first_price };
enum class TieBreak { coin, win, lose };

/// Distribution over integer cents, clamped to [0, 200].
struct CentsDistribution
{
    enum class Kind { constant, uniform, lognormal, discrete };

    Kind kind = Kind::constant;
    int value = 0;            // constant
    int lo = 0, hi = 0;       // uniform, inclusive
    double median = 1.0;      // lognormal
    double sigma = 0.0;       // lognormal
    std::vector<std::pair<int, double>> atoms; // discrete: (cents, probability)

    static CentsDistribution constant_at(int cents)
    {
        CentsDistribution d;
        d.value = cents;
        return d;
    }
    static CentsDistribution uniform_on(int lo, int hi)
    {
        CentsDistribution d;
        d.kind = Kind::uniform;
        d.lo = lo;
        d.hi = hi;
        return d;
    }
    static CentsDistribution lognormal_with(double median, double sigma)
    {
        CentsDistribution d;
        d.kind = Kind::lognormal;
        d.median = median;
        d.sigma = sigma;
        return d;
    }
    static CentsDistribution discrete_over(std::vector<std::pair<int, double>> atoms)
    {
        CentsDistribution d;
        d.kind = Kind::discrete;
        d.atoms = std::move(atoms);
        return d;
    }

    void validate(int max_cents, const std::string& where) const
    {
        auto in_range = [&](int c) { return c >= 0 && c <= max_cents; };
        switch (kind) {
        case Kind::constant:
            if (!in_range(value))
                throw std::invalid_argument(where + ": value out of [0, " + std::to_string(max_cents) + "]");
            break;
        case Kind::uniform:
            if (!in_range(lo) || !in_range(hi) || lo > hi)
                throw std::invalid_argument(where + ": need 0 <= lo <= hi <= " + std::to_string(max_cents));
            break;
        case Kind::lognormal:
            if (!(median > 0.0) || !(sigma >= 0.0))
                throw std::invalid_argument(where + ": need median > 0 and sigma >= 0");
            break;
        case Kind::discrete: {
            if (atoms.empty())
                throw std::invalid_argument(where + ": discrete distribution needs atoms");
            double total = 0.0;
            for (const auto& [c, p] : atoms) {
                if (!in_range(c) || !(p >= 0.0))
                    throw std::invalid_argument(where + ": invalid atom");
                total += p;
            }
            if (std::abs(total - 1.0) > 1e-9)
                throw std::invalid_argument(where + ": atom probabilities must sum to 1");
            break;
        }
        }
    }

    // Draw count per call depends only on the kind, never on the outcome.
    int draw(Stream& rng, int max_cents) const
    {
        switch (kind) {
        case Kind::constant:
            return value;
        case Kind::uniform:
            return static_cast<int>(rng.uniform_int(lo, hi));
        case Kind::lognormal: {
            const double x = std::exp(std::log(median) + sigma * rng.normal());
            return static_cast<int>(std::clamp(std::round(x), 0.0, static_cast<double>(max_cents)));
        }
        case Kind::discrete: {
            const double u = rng.uniform();
            double cumulative = 0.0;
            for (const auto& [c, p] : atoms) {
                cumulative += p;
                if (u < cumulative)
                    return c;
            }
            return atoms.back().first;
        }
        }
        return 0;
    }

    double mean_cents(int max_cents) const
    {
        switch (kind) {
        case Kind::constant:
            return value;
        case Kind::uniform:
            return 0.5 * (lo + hi);
        case Kind::lognormal:
            return std::min(median * std::exp(0.5 * sigma * sigma), static_cast<double>(max_cents));
        case Kind::discrete: {
            double m = 0.0;
            for (const auto& [c, p] : atoms)
                m += c * p;
            return m;
        }
        }
        return 0.0;
    }
};

inline constexpr int kMaxCompetitorCents = 200;
inline constexpr int kMaxValueCents = 1'000'000;

struct MechanismSpec
{
    MechanismKind kind = MechanismKind::second_price;
    CentsDistribution competitor = CentsDistribution::uniform_on(1, 40); // highest competing bid
    double click_prob = 1.0;                                             // click given a win
    TieBreak tie_break = TieBreak::coin;
};

struct ValuationModel
{
    double conversion_prob = 0.0;                         // sale given a click
    CentsDistribution value = CentsDistribution::constant_at(0); // sale value
};

struct TrafficModel
{
    double base_rate = 0.0;             // mean auctions per round in the busiest period
    std::vector<double> period_factors; // one per intra-day period, max exactly 1
};

struct ItemEnvironment
{
    MechanismSpec mechanism;
    ValuationModel valuation;
    TrafficModel traffic;

    void validate(const std::string& where) const
    {
        mechanism.competitor.validate(kMaxCompetitorCents, where + ".competitor");
        valuation.value.validate(kMaxValueCents, where + ".value");
        if (!(mechanism.click_prob >= 0.0 && mechanism.click_prob <= 1.0))
            throw std::invalid_argument(where + ".click_prob: must be in [0, 1]");
        if (!(valuation.conversion_prob >= 0.0 && valuation.conversion_prob <= 1.0))
            throw std::invalid_argument(where + ".conversion_prob: must be in [0, 1]");
        if (!(traffic.base_rate >= 0.0 && traffic.base_rate <= 700.0))
            throw std::invalid_argument(where + ".traffic.base_rate: must be in [0, 700]");
        if (traffic.period_factors.empty())
            throw std::invalid_argument(where + ".traffic.period_factors: must not be empty");
        double top = 0.0;
        for (double f : traffic.period_factors) {
            if (!(f > 0.0 && f <= 1.0))
                throw std::invalid_argument(where + ".traffic.period_factors: each factor must be in (0, 1]");
            top = std::max(top, f);
        }
        if (top != 1.0)
            throw std::invalid_argument(where + ".traffic.period_factors: the largest factor must equal 1");
    }
};

struct AggregatedOutcome
{
    std::uint64_t round = 0;
    std::size_t item = 0;
    int bid_cents = 0;
    std::int64_t clicks = 0;
    std::int64_t payment_cents = 0;
    std::int64_t gain_cents = 0;
    std::int64_t contest_size = 0;

    friend bool operator==(const AggregatedOutcome&, const AggregatedOutcome&) = default;
};

inline std::int64_t profit(const AggregatedOutcome& o) { return o.gain_cents - o.payment_cents; }

/// Realized randomness of a single auction, independent of the bid placed.
struct AuctionDraw
{
    int competitor_cents = 0;
    double tie_u = 0.0;
    double click_u = 0.0;
    double conversion_u = 0.0;
    int value_cents = 0;
};

/// All draws of one reward contest; resolving it under different bids shares
/// the same randomness (common random numbers).
struct ContestDraws
{
    std::uint64_t round = 0;
    std::size_t item = 0;
    std::vector<AuctionDraw> auctions;
};

/// Simulated blackbox auction market: one single-slot auction per arrival,
/// aggregated per round and item.
class AuctionEnvironment
{
public:
    AuctionEnvironment(std::vector<ItemEnvironment> items, std::uint64_t seed, std::string tag = "env")
        : items_(std::move(items)), seed_(seed), tag_(std::move(tag))
    {
        for (std::size_t j = 0; j < items_.size(); ++j)
            items_[j].validate("environment.items[" + std::to_string(j) + "]");
    }

    std::size_t items() const noexcept { return items_.size(); }
    const ItemEnvironment& item(std::size_t j) const { return items_.at(j); }
    std::uint64_t seed() const noexcept { return seed_; }

    /// period is 1-based within the day.
    ContestDraws draw_contest(std::size_t item, std::uint64_t round, std::size_t period) const
    {
        const ItemEnvironment& env = items_.at(item);
        const auto& factors = env.traffic.period_factors;
        if (period < 1 || period > factors.size())
            throw std::out_of_range("period index out of range");

        Stream rng(seed_, tag_, item, round);
        ContestDraws draws{round, item, {}};
        const auto size = rng.poisson(env.traffic.base_rate * factors[period - 1]);
        draws.auctions.reserve(size);
        for (std::uint64_t k = 0; k < size; ++k) {
            AuctionDraw a;
            a.competitor_cents = env.mechanism.competitor.draw(rng, kMaxCompetitorCents);
            a.tie_u = rng.uniform();
            a.click_u = rng.uniform();
            a.conversion_u = rng.uniform();
            a.value_cents = env.valuation.value.draw(rng, kMaxValueCents);
            draws.auctions.push_back(a);
        }
        return draws;
    }

    AggregatedOutcome resolve(const ContestDraws& draws, int bid_cents) const
    {
        const ItemEnvironment& env = items_.at(draws.item);
        AggregatedOutcome out{draws.round, draws.item, bid_cents, 0, 0, 0,
                              static_cast<std::int64_t>(draws.auctions.size())};
        for (const AuctionDraw& a : draws.auctions) {
            bool win = bid_cents > a.competitor_cents;
            if (bid_cents == a.competitor_cents) {
                switch (env.mechanism.tie_break) {
                case TieBreak::coin: win = a.tie_u < 0.5; break;
                case TieBreak::win: win = true; break;
                case TieBreak::lose: win = false; break;
                }
            }
            if (!win || !(a.click_u < env.mechanism.click_prob))
                continue;
            ++out.clicks;
            out.payment_cents +=
                env.mechanism.kind == MechanismKind::second_price ? a.competitor_cents : bid_cents;
            if (a.conversion_u < env.valuation.conversion_prob)
                out.gain_cents += a.value_cents;
        }
        return out;
    }

    AggregatedOutcome run_contest(std::size_t item, int bid_cents, std::uint64_t round, std::size_t period) const
    {
        if (bid_cents < 1)
            throw std::invalid_argument("bid must be at least 1 cent");
        return resolve(draw_contest(item, round, period), bid_cents);
    }

    /// Profit the contest would have produced under every candidate bid.
    std::vector<std::int64_t> counterfactual_profits(std::size_t item, std::uint64_t round, std::size_t period,
                                                     std::span<const int> bids) const
    {
        const ContestDraws draws = draw_contest(item, round, period);
        std::vector<std::int64_t> out;
        out.reserve(bids.size());
        for (int b : bids)
            out.push_back(profit(resolve(draws, b)));
        return out;
    }

private:
    std::vector<ItemEnvironment> items_;
    std::uint64_t seed_;
    std::string tag_;
};

} // namespace batchexp3
