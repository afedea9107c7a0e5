#pragma once

#include "auction_sim.hpp"
#include "bandit_core.hpp"
#include "feedback_pipeline.hpp"
#include "metrics.hpp"
#include "normalization.hpp"
#include "text_io.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchexp3 {

/// Configuration problem tied to a field path, e.g. "environment.shared.click_prob".
class ValidationError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

struct NormalizationSource
{
    enum class Kind { constants, history_file, simulated_history };

    Kind kind = Kind::constants;
    NormalizationConfig constants;
    std::string history_file;
    std::uint64_t history_days = 0;
};

struct ExperimentConfig
{
    std::vector<int> bid_space = BidSpace::standard().cents();
    double eta = 0.1;
    std::optional<ResetEvent> reset;
    std::size_t items = 1;
    std::uint64_t batch_size = 8;
    std::uint64_t delay = 2;
    std::uint64_t horizon = 8;
    bool shared_environment = true;
    std::vector<ItemEnvironment> environments; // one entry if shared, else one per item
    NormalizationSource normalization;
    GroupThresholds groups;
    std::uint64_t seed = 0;
    std::string output_dir = "out";

    std::vector<ItemEnvironment> item_environments() const
    {
        if (shared_environment)
            return std::vector<ItemEnvironment>(items, environments.at(0));
        return environments;
    }

    BatchGrid grid() const { return BatchGrid(batch_size, delay, horizon); }
};

namespace detail {

using nlohmann::json;

class Fields
{
public:
    Fields(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ValidationError(where() + ": expected an object");
    }

    std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
    std::string where() const { return path_.empty() ? "config" : path_; }
    bool has(const std::string& key) const { return j_.contains(key); }

    const json& raw(const std::string& key) const
    {
        if (!j_.contains(key))
            throw ValidationError(at(key) + ": required field missing");
        return j_.at(key);
    }

    double number(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_number())
            throw ValidationError(at(key) + ": expected a number");
        return v.get<double>();
    }

    std::int64_t integer(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_number_integer())
            throw ValidationError(at(key) + ": expected an integer");
        return v.get<std::int64_t>();
    }

    std::uint64_t count(const std::string& key) const
    {
        const auto v = integer(key);
        if (v < 0)
            throw ValidationError(at(key) + ": must be nonnegative");
        return static_cast<std::uint64_t>(v);
    }

    std::string string(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_string())
            throw ValidationError(at(key) + ": expected a string");
        return v.get<std::string>();
    }

    std::vector<double> numbers(const std::string& key) const
    {
        const json& v = raw(key);
        if (!v.is_array())
            throw ValidationError(at(key) + ": expected an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number())
                throw ValidationError(at(key) + ": expected an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

    void only(std::initializer_list<const char*> allowed) const
    {
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& [k, v] : j_.items())
            if (!ok.count(k))
                throw ValidationError(at(k) + ": unknown field");
    }

private:
    const json& j_;
    std::string path_;
};

inline CentsDistribution parse_distribution(const json& j, const std::string& path)
{
    Fields f(j, path);
    const std::string kind = f.string("kind");
    CentsDistribution d;
    if (kind == "constant") {
        f.only({"kind", "cents"});
        d = CentsDistribution::constant_at(static_cast<int>(f.integer("cents")));
    } else if (kind == "uniform") {
        f.only({"kind", "lo", "hi"});
        d = CentsDistribution::uniform_on(static_cast<int>(f.integer("lo")), static_cast<int>(f.integer("hi")));
    } else if (kind == "lognormal") {
        f.only({"kind", "median", "sigma"});
        d = CentsDistribution::lognormal_with(f.number("median"), f.number("sigma"));
    } else if (kind == "discrete") {
        f.only({"kind", "atoms"});
        const json& atoms = f.raw("atoms");
        if (!atoms.is_array())
            throw ValidationError(f.at("atoms") + ": expected [[cents, probability], ...]");
        std::vector<std::pair<int, double>> parsed;
        for (const auto& a : atoms) {
            if (!a.is_array() || a.size() != 2 || !a[0].is_number_integer() || !a[1].is_number())
                throw ValidationError(f.at("atoms") + ": expected [[cents, probability], ...]");
            parsed.emplace_back(a[0].get<int>(), a[1].get<double>());
        }
        d = CentsDistribution::discrete_over(std::move(parsed));
    } else {
        throw ValidationError(f.at("kind") + ": unknown distribution '" + kind + "'");
    }
    return d;
}

inline json distribution_to_json(const CentsDistribution& d)
{
    switch (d.kind) {
    case CentsDistribution::Kind::constant: return {{"kind", "constant"}, {"cents", d.value}};
    case CentsDistribution::Kind::uniform: return {{"kind", "uniform"}, {"lo", d.lo}, {"hi", d.hi}};
    case CentsDistribution::Kind::lognormal:
        return {{"kind", "lognormal"}, {"median", d.median}, {"sigma", d.sigma}};
    case CentsDistribution::Kind::discrete: {
        json atoms = json::array();
        for (const auto& [c, p] : d.atoms)
            atoms.push_back({c, p});
        return {{"kind", "discrete"}, {"atoms", atoms}};
    }
    }
    return {};
}

inline ItemEnvironment parse_environment(const json& j, const std::string& path)
{
    Fields f(j, path);
    f.only({"mechanism", "tie_break", "competitor", "click_prob", "conversion_prob", "value", "traffic"});
    ItemEnvironment env;
    const std::string mech = f.has("mechanism") ? f.string("mechanism") : "second_price";
    if (mech == "second_price")
        env.mechanism.kind = MechanismKind::second_price;
    else if (mech == "first_price")
        env.mechanism.kind = MechanismKind::first_price;
    else
        throw ValidationError(f.at("mechanism") + ": expected second_price or first_price");
    const std::string tie = f.has("tie_break") ? f.string("tie_break") : "coin";
    if (tie == "coin")
        env.mechanism.tie_break = TieBreak::coin;
    else if (tie == "win")
        env.mechanism.tie_break = TieBreak::win;
    else if (tie == "lose")
        env.mechanism.tie_break = TieBreak::lose;
    else
        throw ValidationError(f.at("tie_break") + ": expected coin, win or lose");
    env.mechanism.competitor = parse_distribution(f.raw("competitor"), f.at("competitor"));
    env.mechanism.click_prob = f.number("click_prob");
    env.valuation.conversion_prob = f.number("conversion_prob");
    env.valuation.value = parse_distribution(f.raw("value"), f.at("value"));
    Fields traffic(f.raw("traffic"), f.at("traffic"));
    traffic.only({"base_rate", "period_factors"});
    env.traffic.base_rate = traffic.number("base_rate");
    env.traffic.period_factors = traffic.numbers("period_factors");
    try {
        env.validate(path);
    } catch (const ValidationError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ValidationError(e.what());
    }
    return env;
}

inline json environment_to_json(const ItemEnvironment& env)
{
    const char* tie = env.mechanism.tie_break == TieBreak::coin  ? "coin"
                      : env.mechanism.tie_break == TieBreak::win ? "win"
                                                                 : "lose";
    return {{"mechanism", env.mechanism.kind == MechanismKind::second_price ? "second_price" : "first_price"},
            {"tie_break", tie},
            {"competitor", distribution_to_json(env.mechanism.competitor)},
            {"click_prob", env.mechanism.click_prob},
            {"conversion_prob", env.valuation.conversion_prob},
            {"value", distribution_to_json(env.valuation.value)},
            {"traffic", {{"base_rate", env.traffic.base_rate}, {"period_factors", env.traffic.period_factors}}}};
}

} // namespace detail

/// Cross-field checks: closed-world item coverage, grid shape, reset placement.
inline void validate(const ExperimentConfig& c)
{
    try {
        BidSpace bids(c.bid_space);
        if (bids.cents().back() > kMaxCompetitorCents)
            throw ValidationError("bid_space: bids above " + std::to_string(kMaxCompetitorCents) + " cents");
    } catch (const ValidationError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ValidationError(std::string("bid_space: ") + e.what());
    }
    if (!(c.eta > 0.0) || !std::isfinite(c.eta))
        throw ValidationError("eta: must be positive");
    if (c.items < 1)
        throw ValidationError("items: must be at least 1");
    if (c.batch_size < 1)
        throw ValidationError("batch_size: must be at least 1");
    if (c.horizon < 1 || c.horizon % c.batch_size != 0)
        throw ValidationError("horizon: must be a positive multiple of batch_size");
    if (c.reset) {
        if (!(c.reset->eta > 0.0) || !std::isfinite(c.reset->eta))
            throw ValidationError("reset.eta: must be positive");
        if (c.reset->round < 2 || c.reset->round > c.horizon || (c.reset->round - 1) % c.batch_size != 0)
            throw ValidationError("reset.round: must be the first round of a batch after the first");
    }
    if (c.shared_environment ? c.environments.size() != 1 : c.environments.size() != c.items)
        throw ValidationError(c.shared_environment ? "environment.shared: missing"
                                                   : "environment.per_item: expected " + std::to_string(c.items) +
                                                         " entries, got " + std::to_string(c.environments.size()));
    for (std::size_t j = 0; j < c.environments.size(); ++j) {
        const std::string path =
            c.shared_environment ? "environment.shared" : "environment.per_item[" + std::to_string(j) + "]";
        try {
            c.environments[j].validate(path);
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
        if (c.environments[j].traffic.period_factors.size() != c.batch_size)
            throw ValidationError(path + ".traffic.period_factors: expected " + std::to_string(c.batch_size) +
                                  " entries (one per period)");
    }
    if (c.normalization.kind == NormalizationSource::Kind::constants) {
        try {
            c.normalization.constants.validate(c.items, c.batch_size);
        } catch (const std::invalid_argument& e) {
            throw ValidationError(e.what());
        }
    } else if (c.normalization.kind == NormalizationSource::Kind::history_file) {
        if (c.normalization.history_file.empty())
            throw ValidationError("normalization.history_file: must not be empty");
    } else if (c.normalization.history_days < 1 ||
               c.normalization.history_days * c.batch_size < kMinQuantileHistory) {
        throw ValidationError("normalization.simulated_history.days: need at least " +
                              std::to_string(kMinQuantileHistory) + " historical rounds per item");
    }
}

inline ExperimentConfig parse_config(const nlohmann::json& j)
{
    using detail::Fields;
    Fields f(j, "");
    f.only({"bid_space", "eta", "reset", "items", "batch_size", "delay", "horizon", "environment", "normalization",
            "groups", "seed", "output_dir"});
    ExperimentConfig c;
    if (f.has("bid_space")) {
        const auto& arr = f.raw("bid_space");
        if (!arr.is_array())
            throw ValidationError("bid_space: expected an array of integer cents");
        c.bid_space.clear();
        for (const auto& b : arr) {
            if (!b.is_number_integer())
                throw ValidationError("bid_space: expected an array of integer cents");
            c.bid_space.push_back(b.get<int>());
        }
    }
    c.eta = f.number("eta");
    if (f.has("reset")) {
        Fields r(f.raw("reset"), "reset");
        r.only({"round", "eta"});
        c.reset = ResetEvent{r.count("round"), r.number("eta")};
    }
    c.items = f.count("items");
    c.batch_size = f.count("batch_size");
    c.delay = f.count("delay");
    c.horizon = f.count("horizon");
    c.seed = f.count("seed");
    if (f.has("output_dir"))
        c.output_dir = f.string("output_dir");

    Fields env(f.raw("environment"), "environment");
    env.only({"shared", "per_item"});
    if (env.has("shared") == env.has("per_item"))
        throw ValidationError("environment: specify exactly one of shared or per_item");
    if (env.has("shared")) {
        c.shared_environment = true;
        c.environments = {detail::parse_environment(env.raw("shared"), "environment.shared")};
    } else {
        c.shared_environment = false;
        const auto& arr = env.raw("per_item");
        if (!arr.is_array())
            throw ValidationError("environment.per_item: expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i)
            c.environments.push_back(
                detail::parse_environment(arr[i], "environment.per_item[" + std::to_string(i) + "]"));
    }

    Fields norm(f.raw("normalization"), "normalization");
    if (norm.has("history_file")) {
        norm.only({"history_file"});
        c.normalization.kind = NormalizationSource::Kind::history_file;
        c.normalization.history_file = norm.string("history_file");
    } else if (norm.has("simulated_history")) {
        norm.only({"simulated_history"});
        Fields sim(norm.raw("simulated_history"), "normalization.simulated_history");
        sim.only({"days"});
        c.normalization.kind = NormalizationSource::Kind::simulated_history;
        c.normalization.history_days = sim.count("days");
    } else {
        norm.only({"alphas", "r_min", "r_max"});
        c.normalization.kind = NormalizationSource::Kind::constants;
        c.normalization.constants.alphas = norm.numbers("alphas");
        const auto lo = norm.numbers("r_min");
        const auto hi = norm.numbers("r_max");
        if (lo.size() != hi.size())
            throw ValidationError("normalization.r_min/r_max: lengths differ");
        for (std::size_t i = 0; i < lo.size(); ++i)
            c.normalization.constants.ranges.push_back({lo[i], hi[i]});
    }

    if (f.has("groups")) {
        Fields g(f.raw("groups"), "groups");
        g.only({"low_traffic_clicks", "gain_to_cost_cutoff"});
        c.groups.low_traffic_clicks = g.number("low_traffic_clicks");
        c.groups.gain_to_cost_cutoff = g.number("gain_to_cost_cutoff");
    }
    validate(c);
    return c;
}

inline nlohmann::json to_json(const ExperimentConfig& c)
{
    nlohmann::json j;
    j["bid_space"] = c.bid_space;
    j["eta"] = c.eta;
    if (c.reset)
        j["reset"] = {{"round", c.reset->round}, {"eta", c.reset->eta}};
    j["items"] = c.items;
    j["batch_size"] = c.batch_size;
    j["delay"] = c.delay;
    j["horizon"] = c.horizon;
    j["seed"] = c.seed;
    j["output_dir"] = c.output_dir;
    if (c.shared_environment) {
        j["environment"]["shared"] = detail::environment_to_json(c.environments.at(0));
    } else {
        j["environment"]["per_item"] = nlohmann::json::array();
        for (const auto& e : c.environments)
            j["environment"]["per_item"].push_back(detail::environment_to_json(e));
    }
    switch (c.normalization.kind) {
    case NormalizationSource::Kind::constants: {
        std::vector<double> lo, hi;
        for (const auto& r : c.normalization.constants.ranges) {
            lo.push_back(r.r_min);
            hi.push_back(r.r_max);
        }
        j["normalization"] = {{"alphas", c.normalization.constants.alphas}, {"r_min", lo}, {"r_max", hi}};
        break;
    }
    case NormalizationSource::Kind::history_file:
        j["normalization"] = {{"history_file", c.normalization.history_file}};
        break;
    case NormalizationSource::Kind::simulated_history:
        j["normalization"] = {{"simulated_history", {{"days", c.normalization.history_days}}}};
        break;
    }
    j["groups"] = {{"low_traffic_clicks", c.groups.low_traffic_clicks},
                   {"gain_to_cost_cutoff", c.groups.gain_to_cost_cutoff}};
    return j;
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ExperimentConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open config file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
    return parse_config(j);
}

/// Hash of everything that fixes the environment and the learner's shape.
/// Learning rate, reset schedule and output location are excluded so a run
/// can be resumed with an adjusted rate.
inline std::string config_hash(const ExperimentConfig& c)
{
    auto j = to_json(c);
    j.erase("eta");
    j.erase("reset");
    j.erase("output_dir");
    return text::hex64(fnv1a64(j.dump()));
}

} // namespace batchexp3
