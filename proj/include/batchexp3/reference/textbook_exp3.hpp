#pragma once

// Stand-alone textbook EXP3 used as a reference trajectory. Deliberately
// shares nothing with the batch learner except the random stream type.

#include "../rng.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace batchexp3::reference {

struct Exp3Step
{
    std::vector<double> probs;  // distribution the arm was drawn from
    std::size_t arm = 0;
    double reward = 0.0;
    std::vector<double> scores; // after the update
};

/// EXP3 with the loss-based importance-weighted estimator:
///   P_t(i) = exp(eta S_{t-1,i}) / sum_l exp(eta S_{t-1,l})
///   S_{t,i} = S_{t-1,i} + 1 - 1{A_t = i} (1 - X_t) / P_t(i)
/// reward(t, i) must return a value in [0, 1].
template <class RewardFn>
std::vector<Exp3Step> run_textbook_exp3(std::size_t arms, double eta, std::uint64_t rounds, Stream stream,
                                        RewardFn&& reward)
{
    std::vector<double> S(arms, 0.0);
    std::vector<Exp3Step> trace;
    trace.reserve(rounds);
    for (std::uint64_t t = 1; t <= rounds; ++t) {
        double m = S[0];
        for (std::size_t i = 1; i < arms; ++i)
            if (S[i] > m)
                m = S[i];
        std::vector<double> P(arms);
        double z = 0.0;
        for (std::size_t i = 0; i < arms; ++i) {
            P[i] = std::exp(eta * (S[i] - m));
            z += P[i];
        }
        for (std::size_t i = 0; i < arms; ++i)
            P[i] /= z;

        const double u = stream.uniform();
        std::size_t A = arms - 1;
        double c = 0.0;
        for (std::size_t i = 0; i < arms; ++i) {
            c += P[i];
            if (u < c) {
                A = i;
                break;
            }
        }

        const double X = reward(t, A);
        for (std::size_t i = 0; i < arms; ++i)
            S[i] += 1.0 - (i == A ? (1.0 - X) / P[i] : 0.0);
        trace.push_back({P, A, X, S});
    }
    return trace;
}

} // namespace batchexp3::reference
