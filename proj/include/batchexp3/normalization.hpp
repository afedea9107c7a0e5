#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchexp3 {

inline constexpr std::size_t kMinQuantileHistory = 20;

struct QuantileRange
{
    double r_min = 0.0;
    double r_max = 1.0;
};

/// Period weights (shared by all items) and per-item profit range.
struct NormalizationConfig
{
    std::vector<double> alphas;
    std::vector<QuantileRange> ranges;

    void validate(std::size_t items, std::size_t periods) const
    {
        if (alphas.size() != periods)
            throw std::invalid_argument("normalization.alphas: expected " + std::to_string(periods) +
                                        " entries, got " + std::to_string(alphas.size()));
        double top = 0.0;
        for (double a : alphas) {
            if (!(a > 0.0 && a <= 1.0))
                throw std::invalid_argument("normalization.alphas: each entry must be in (0, 1]");
            top = std::max(top, a);
        }
        if (top != 1.0)
            throw std::invalid_argument("normalization.alphas: the largest entry must equal 1");
        if (ranges.size() != items)
            throw std::invalid_argument("normalization: expected r_min/r_max for " + std::to_string(items) +
                                        " items, got " + std::to_string(ranges.size()));
        for (std::size_t j = 0; j < ranges.size(); ++j)
            if (!(ranges[j].r_min < ranges[j].r_max) || !std::isfinite(ranges[j].r_min) ||
                !std::isfinite(ranges[j].r_max))
                throw std::invalid_argument("normalization.r_min/r_max[" + std::to_string(j) +
                                            "]: need finite r_min < r_max");
    }
};

/// Scales a round's profit by the weight of its period (1-based).
inline double traffic_normalize(double profit, std::size_t period, std::span<const double> alphas)
{
    if (period < 1 || period > alphas.size())
        throw std::out_of_range("period index " + std::to_string(period) + " outside 1.." +
                                std::to_string(alphas.size()));
    return alphas[period - 1] * profit;
}

inline double minimax_normalize(double value, double r_min, double r_max)
{
    if (!(r_min < r_max))
        throw std::invalid_argument("minimax normalization needs r_min < r_max");
    return std::clamp((value - r_min) / (r_max - r_min), 0.0, 1.0);
}

/// Linear interpolation between order statistics at position (N - 1) p.
inline double empirical_quantile(std::span<const double> sorted, double p)
{
    if (sorted.empty())
        throw std::invalid_argument("quantile of empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// 5th and 95th percentiles of one item's historical profit.
inline QuantileRange fit_quantiles(std::span<const double> history)
{
    if (history.size() < kMinQuantileHistory)
        throw std::invalid_argument("need at least " + std::to_string(kMinQuantileHistory) +
                                    " historical observations, got " + std::to_string(history.size()));
    std::vector<double> sorted(history.begin(), history.end());
    std::sort(sorted.begin(), sorted.end());
    QuantileRange range{empirical_quantile(sorted, 0.05), empirical_quantile(sorted, 0.95)};
    if (!(range.r_min < range.r_max))
        throw std::invalid_argument("degenerate history: 5th and 95th percentiles coincide");
    return range;
}

inline std::vector<QuantileRange> fit_quantiles(const std::vector<std::vector<double>>& per_item)
{
    std::vector<QuantileRange> out;
    out.reserve(per_item.size());
    for (std::size_t j = 0; j < per_item.size(); ++j) {
        try {
            out.push_back(fit_quantiles(per_item[j]));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("item " + std::to_string(j) + ": " + e.what());
        }
    }
    return out;
}

/// alpha_l = mean volume of period l / max over periods of the mean volume.
inline std::vector<double> fit_alphas(const std::vector<std::vector<double>>& volumes_by_period)
{
    if (volumes_by_period.empty())
        throw std::invalid_argument("traffic history has no periods");
    std::vector<double> means;
    for (std::size_t l = 0; l < volumes_by_period.size(); ++l) {
        const auto& v = volumes_by_period[l];
        double sum = 0.0;
        for (double x : v)
            sum += x;
        const double mean = v.empty() ? 0.0 : sum / static_cast<double>(v.size());
        if (!(mean > 0.0))
            throw std::invalid_argument("period " + std::to_string(l + 1) + " has zero average traffic");
        means.push_back(mean);
    }
    const double top = *std::max_element(means.begin(), means.end());
    for (double& m : means)
        m = m == top ? 1.0 : m / top;
    return means;
}

/// Traffic weighting followed by clamped minimax scaling.
class RewardNormalizer
{
public:
    explicit RewardNormalizer(NormalizationConfig config) : config_(std::move(config)) {}

    double operator()(std::size_t item, std::size_t period, double profit) const
    {
        const QuantileRange& range = config_.ranges.at(item);
        return minimax_normalize(traffic_normalize(profit, period, config_.alphas), range.r_min, range.r_max);
    }

    const NormalizationConfig& config() const noexcept { return config_; }

private:
    NormalizationConfig config_;
};

/// One historical round: item, 1-based period, profit in cents, traffic volume.
struct HistoryRow
{
    std::size_t item = 0;
    std::size_t period = 1;
    double profit = 0.0;
    double volume = 0.0;
};

inline void write_history_csv(const std::string& path, std::span<const HistoryRow> rows)
{
    std::ofstream out(path);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "item,period,profit,volume\n";
    for (const auto& r : rows)
        out << r.item << ',' << r.period << ',' << r.profit << ',' << r.volume << '\n';
}

inline std::vector<HistoryRow> read_history_csv(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::invalid_argument("cannot open history file " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("item,period,profit,volume", 0) != 0)
        throw std::invalid_argument(path + ": expected header item,period,profit,volume");
    std::vector<HistoryRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        std::istringstream ss(line);
        HistoryRow r;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ss >> r.item >> c1 >> r.period >> c2 >> r.profit >> c3 >> r.volume) || c1 != ',' || c2 != ',' ||
            c3 != ',')
            throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": malformed row");
        rows.push_back(r);
    }
    return rows;
}

/// Fits alphas (market level, from volumes) and per-item ranges (from profits).
inline NormalizationConfig fit_normalization(std::span<const HistoryRow> rows, std::size_t items,
                                             std::size_t periods)
{
    std::vector<std::vector<double>> profits(items);
    std::vector<std::vector<double>> volumes(periods);
    for (const auto& r : rows) {
        if (r.item >= items)
            throw std::invalid_argument("history references unknown item " + std::to_string(r.item));
        if (r.period < 1 || r.period > periods)
            throw std::invalid_argument("history period " + std::to_string(r.period) + " outside 1.." +
                                        std::to_string(periods));
        profits[r.item].push_back(r.profit);
        volumes[r.period - 1].push_back(r.volume);
    }
    return {fit_alphas(volumes), fit_quantiles(profits)};
}

} // namespace batchexp3
